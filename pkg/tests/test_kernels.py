import math

import numpy as np
import pytest

from maskmatch import kernels as K
from maskmatch.kernels import _pykernels


def test_softmax_symmetric_pair():
    out = K.softmax_rows(np.array([[0.0, 0.0]]))
    np.testing.assert_array_equal(out, [[0.5, 0.5]])


@pytest.mark.parametrize("x", [0.0, -3.5, 7.25, 1e4])
def test_softmax_shift_invariance(x):
    out = K.softmax_rows(np.array([[x, x, x]]))
    np.testing.assert_allclose(out, [[1 / 3, 1 / 3, 1 / 3]], rtol=0, atol=1e-15)


def test_softmax_log_row():
    row = np.array([math.log(1), math.log(2), math.log(3)])
    # independent evaluation of exp/sum
    expected = [math.exp(v) for v in row]
    expected = np.array(expected) / sum(expected)
    np.testing.assert_allclose(K.softmax_rows(row[None, :])[0], expected, atol=1e-15)
    np.testing.assert_allclose(expected, [1 / 6, 2 / 6, 3 / 6], atol=1e-15)


def test_softmax_rows_sum_to_one_bulk():
    rng = np.random.default_rng(1)
    rows = rng.normal(scale=30.0, size=(10_000, 7))
    out = K.softmax_rows(rows)
    sums = out.sum(axis=1)
    assert np.abs(sums - 1.0).max() < 1e-6
    assert out.min() > 0.0
    assert out.max() <= 1.0


def test_softmax_axis_and_ndim():
    rng = np.random.default_rng(2)
    t = rng.normal(size=(3, 4, 5))
    for axis in (0, 1, 2, -1):
        out = K.softmax_rows(t, axis=axis)
        np.testing.assert_allclose(out.sum(axis=axis), np.ones_like(out.sum(axis=axis)), atol=1e-12)


def test_softmax_errors():
    with pytest.raises(ValueError, match="degenerate shape"):
        K.softmax_rows(np.empty((0, 3)))
    with pytest.raises(ValueError, match="axis"):
        K.softmax_rows(np.ones((2, 2)), axis=5)


def test_resize_constant_one_cell():
    for target in [(1, 1), (3, 5), (16, 16)]:
        out = K.resize_bilinear(np.full((1, 1), 0.7), target)
        assert out.shape == target
        np.testing.assert_array_equal(out, np.full(target, 0.7))


def test_resize_monotone_rows():
    out = K.resize_bilinear(np.array([[0.0, 1.0], [0.0, 1.0]]), (2, 4))
    assert out.shape == (2, 4)
    assert (np.diff(out, axis=1) >= 0).all()


def test_resize_mean_preserved_on_upsample():
    src = np.array([[0.0, 0.0], [1.0, 1.0]])
    out = K.resize_bilinear(src, (4, 4))
    # independent oracle: direct average of the source
    assert out.mean() == pytest.approx(src.mean(), abs=1e-15)


def test_resize_constant_grid_machine_precision():
    rng = np.random.default_rng(3)
    c = float(rng.normal())
    out = K.resize_bilinear(np.full((5, 9), c), (17, 4))
    np.testing.assert_array_equal(out, np.full((17, 4), c))


def test_resize_errors():
    with pytest.raises(ValueError):
        K.resize_bilinear(np.ones((2, 2)), (0, 4))
    with pytest.raises(ValueError):
        K.resize_bilinear(np.ones((2, 2, 2)), (4, 4))


def test_minmax_affine():
    np.testing.assert_array_equal(K.minmax_normalize(np.array([2.0, 4.0, 6.0])), [0.0, 0.5, 1.0])


def test_minmax_constant_goes_to_zero():
    np.testing.assert_array_equal(K.minmax_normalize(np.full(3, 5.0)), np.zeros(3))


def test_minmax_preserves_argmax():
    rng = np.random.default_rng(4)
    for _ in range(50):
        v = rng.normal(size=8)
        out = K.minmax_normalize(v)
        assert np.argmax(out) == np.argmax(v)
        assert out.min() >= 0.0 and out.max() <= 1.0


def test_threshold_basics():
    ones = np.ones((2, 3))
    np.testing.assert_array_equal(K.threshold_binarize(ones, 0.3), np.ones((2, 3), bool))
    np.testing.assert_array_equal(K.threshold_binarize(np.zeros((2, 3)), 0.3), np.zeros((2, 3), bool))


def test_threshold_inclusive_boundary():
    out = K.threshold_binarize(np.array([0.3, 0.29999999]), 0.3)
    np.testing.assert_array_equal(out, [True, False])


def test_threshold_idempotent_on_own_output():
    rng = np.random.default_rng(5)
    v = rng.random(100)
    for tau in (0.0, 0.3, 0.5, 1.0):
        first = K.threshold_binarize(v, tau)
        again = K.threshold_binarize(first.astype(np.float64), tau)
        np.testing.assert_array_equal(first, again)


def test_threshold_rejects_bad_tau():
    with pytest.raises(ValueError):
        K.threshold_binarize(np.ones(2), 1.5)
    with pytest.raises(ValueError):
        K.threshold_binarize(np.ones(2), -0.1)


def test_masked_select_boundaries():
    rng = np.random.default_rng(6)
    src = rng.normal(size=(3, 4))
    edit = rng.normal(size=(3, 4))
    np.testing.assert_array_equal(K.masked_select(src, edit, np.zeros((3, 4))), src)
    np.testing.assert_array_equal(K.masked_select(src, edit, np.ones((3, 4))), edit)


def test_masked_select_binary_membership():
    rng = np.random.default_rng(7)
    src = rng.normal(size=200)
    edit = rng.normal(size=200)
    mask = (rng.random(200) < 0.5).astype(np.float64)
    out = K.masked_select(src, edit, mask)
    for i in range(200):
        assert out[i] == (edit[i] if mask[i] else src[i])


def test_masked_select_broadcast_and_errors():
    src = np.zeros((2, 3, 4))
    edit = np.ones((2, 3, 4))
    out = K.masked_select(src, edit, np.ones((3, 1)))
    np.testing.assert_array_equal(out, edit)
    with pytest.raises(ValueError, match="shape mismatch"):
        K.masked_select(np.zeros(3), np.ones(4), 0.0)
    with pytest.raises(ValueError, match="broadcast"):
        K.masked_select(np.zeros((2, 3)), np.ones((2, 3)), np.ones(7))


def test_dtype_preserved():
    x = np.array([[1.0, 2.0]], dtype=np.float32)
    assert K.softmax_rows(x).dtype == np.float32
    assert K.resize_bilinear(x, (2, 2)).dtype == np.float32
    assert K.minmax_normalize(x).dtype == np.float32


def test_require_finite():
    with pytest.raises(ValueError, match="non-finite"):
        K.require_finite(np.array([1.0, np.nan]))
    with pytest.raises(ValueError, match="non-finite"):
        K.require_finite(np.array([np.inf]))


@pytest.mark.skipif(K.BACKEND != "cython", reason="compiled backend not built")
def test_backends_agree():
    from maskmatch.kernels import _ckernels

    rng = np.random.default_rng(8)
    rows = np.ascontiguousarray(rng.normal(size=(64, 33)))
    np.testing.assert_allclose(
        np.asarray(_ckernels.softmax_lastaxis(rows)),
        _pykernels.softmax_lastaxis(rows),
        rtol=1e-12,
        atol=1e-15,
    )
    grid = np.ascontiguousarray(rng.random(size=(13, 7)))
    np.testing.assert_allclose(
        np.asarray(_ckernels.resize_bilinear_2d(grid, 31, 5)),
        _pykernels.resize_bilinear_2d(grid, 31, 5),
        rtol=1e-12,
        atol=1e-15,
    )
    flat = np.ascontiguousarray(rng.normal(size=257))
    np.testing.assert_array_equal(
        np.asarray(_ckernels.minmax_normalize_flat(flat)),
        _pykernels.minmax_normalize_flat(flat),
    )
    np.testing.assert_array_equal(
        np.asarray(_ckernels.threshold_binarize_flat(np.abs(flat) / np.abs(flat).max(), 0.3)),
        _pykernels.threshold_binarize_flat(np.abs(flat) / np.abs(flat).max(), 0.3),
    )
    a = (rng.random(500) < 0.4).astype(np.uint8)
    b = (rng.random(500) < 0.4).astype(np.uint8)
    assert _ckernels.mask_counts(a, b) == _pykernels.mask_counts(a, b)

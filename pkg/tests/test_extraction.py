import numpy as np
import pytest

from maskmatch import dumpio, extraction
from maskmatch.extraction import CrossAttentionMap, build_mask_set, candidate_from_map, extract_token_map


def make_map(tensor, layer=0, timestep=0, spatial=None):
    if spatial is None:
        side = int(round(tensor.shape[1] ** 0.5))
        spatial = (side, side)
    return CrossAttentionMap(tensor=tensor, layer=layer, timestep=timestep, spatial=spatial)


def stochastic_tensor(rng, f, s, sp):
    raw = rng.random((f, s, sp))
    return raw / raw.sum(axis=-1, keepdims=True)


def align_for(indices, word="obj"):
    return dumpio.TokenAlignment(word=word, token_indices=list(indices))


def test_extract_single_index_is_slice():
    rng = np.random.default_rng(0)
    t = stochastic_tensor(rng, 2, 4, 3)
    out = extract_token_map(make_map(t), align_for([1]))
    np.testing.assert_array_equal(out, t[:, :, 1].reshape(2, 2, 2))


def test_extract_identical_columns_average_to_same():
    rng = np.random.default_rng(1)
    t = stochastic_tensor(rng, 1, 4, 3)
    t[:, :, 2] = t[:, :, 0]
    one = extract_token_map(make_map(t), align_for([0]))
    both = extract_token_map(make_map(t), align_for([0, 2]))
    np.testing.assert_allclose(both, one, atol=1e-15)


def test_extract_mean_of_two_columns():
    rng = np.random.default_rng(2)
    t = stochastic_tensor(rng, 3, 9, 4)
    out = extract_token_map(make_map(t), align_for([0, 2]))
    # direct mean oracle, cellwise
    expected = ((t[:, :, 0] + t[:, :, 2]) / 2.0).reshape(3, 3, 3)
    np.testing.assert_allclose(out, expected, atol=1e-15)


def test_extract_index_out_of_range():
    t = np.full((1, 4, 2), 0.5)
    with pytest.raises(ValueError, match="out of range"):
        extract_token_map(make_map(t), align_for([2]))


def test_candidate_spike_localizes():
    # one-hot spike at spatial cell c: the mask contains the block that
    # cell maps to at the target resolution
    f, side, sp = 1, 4, 2
    t = np.full((f, side * side, sp), 1e-6)
    spike_cell = 5  # (row 1, col 1)
    t[0, spike_cell, 1] = 1.0
    cand = candidate_from_map(make_map(t), align_for([1]), tau=0.3, resolution=(16, 16))
    assert cand.grid.shape == (1, 16, 16)
    # cell (1,1) of a 4x4 grid covers pixels [4:8, 4:8] of the 16x16 output
    assert cand.grid[0, 5, 5]
    assert cand.grid[0].sum() < 16 * 16 / 2  # stays a localized blob


def test_candidate_uniform_column_empty():
    t = np.full((2, 16, 3), 1 / 3)
    cand = candidate_from_map(make_map(t), align_for([1]), tau=0.3, resolution=(8, 8))
    assert not cand.grid.any()


def reference_candidate(token_map, tau, resolution):
    """Test-local pipeline: loop-based normalize + bilinear resize + threshold."""
    f, h, w = token_map.shape
    out = np.zeros((f,) + resolution, dtype=bool)
    for i in range(f):
        fm = token_map[i]
        lo, hi = fm.min(), fm.max()
        soft = np.zeros_like(fm) if hi == lo else (fm - lo) / (hi - lo)
        big = np.empty(resolution)
        for y in range(resolution[0]):
            sy = min(max((y + 0.5) * h / resolution[0] - 0.5, 0.0), h - 1.0)
            y0 = int(np.floor(sy))
            y1 = min(y0 + 1, h - 1)
            fy = sy - y0
            for x in range(resolution[1]):
                sx = min(max((x + 0.5) * w / resolution[1] - 0.5, 0.0), w - 1.0)
                x0 = int(np.floor(sx))
                x1 = min(x0 + 1, w - 1)
                fx = sx - x0
                top = soft[y0, x0] + fx * (soft[y0, x1] - soft[y0, x0])
                bot = soft[y1, x0] + fx * (soft[y1, x1] - soft[y1, x0])
                big[y, x] = top + fy * (bot - top)
        out[i] = big >= tau
    return out


def test_candidate_disk_map_count_oracle():
    # soft disk-shaped column: mask area equals the count of resized
    # normalized values >= tau, computed by an independent loop pipeline
    side = 8
    yy, xx = np.meshgrid(np.arange(side), np.arange(side), indexing="ij")
    disk = np.exp(-(((yy - 3.5) ** 2 + (xx - 3.5) ** 2) / 8.0))
    t = np.stack([disk.reshape(-1), np.full(side * side, 0.1)], axis=-1)[None, :, :]
    cand = candidate_from_map(make_map(t), align_for([0]), tau=0.3, resolution=(32, 32))
    expected = reference_candidate(disk[None], 0.3, (32, 32))
    assert cand.grid.sum() == expected.sum()
    np.testing.assert_array_equal(cand.grid, expected)


def test_candidate_scale_invariance():
    rng = np.random.default_rng(3)
    t = stochastic_tensor(rng, 2, 16, 3)
    base = candidate_from_map(make_map(t), align_for([1]), 0.3, (8, 8))
    for scale in (0.01, 7.0, 1e4):
        scaled = candidate_from_map(make_map(t * scale), align_for([1]), 0.3, (8, 8))
        np.testing.assert_array_equal(scaled.grid, base.grid)


def test_candidate_deterministic():
    rng = np.random.default_rng(4)
    t = stochastic_tensor(rng, 2, 16, 3)
    a = candidate_from_map(make_map(t), align_for([1]), 0.3, (8, 8))
    b = candidate_from_map(make_map(t.copy()), align_for([1]), 0.3, (8, 8))
    np.testing.assert_array_equal(a.grid, b.grid)


def test_normalize_before_threshold_flag():
    t = np.full((1, 16, 2), 0.5)
    t[0, :4, 1] = 0.6
    with_norm = candidate_from_map(make_map(t), align_for([1]), 0.3, (4, 4), True)
    without = candidate_from_map(make_map(t), align_for([1]), 0.3, (4, 4), False)
    assert with_norm.grid.sum() != without.grid.sum()
    assert without.grid.all()  # raw values all exceed tau


def write_grid_manifest(tmp_path, steps, layers, skip=()):
    rng = np.random.default_rng(5)
    entries = []
    for t in range(steps):
        for l in range(layers):
            if (t, l) in skip:
                continue
            tensor = stochastic_tensor(rng, 2, 4, 3).astype(np.float32)
            e = dumpio.DumpEntry(
                model_id="test",
                layer_index=l,
                timestep_index=t,
                spatial=(2, 2),
                frames=2,
                token_count=3,
                token_strings=["<start>", "a", "square"],
                file=f"t{t:03d}_l{l}.attn",
            )
            dumpio.write_dump(tensor, e, tmp_path)
            entries.append(e)
    path = tmp_path / "manifest.json"
    dumpio.write_manifest(entries, path)
    return path


def test_build_mask_set_cardinality(tmp_path):
    manifest = write_grid_manifest(tmp_path, 2, 2)
    align = align_for([2], word="square")
    mask_set = build_mask_set(manifest, align, 0.3, (8, 8))
    assert len(mask_set.candidates) == 4
    assert mask_set.steps == 2 and mask_set.layers == 2
    assert all(c.grid.shape == (2, 8, 8) for c in mask_set.candidates.values())


def test_build_mask_set_missing_pair(tmp_path):
    manifest = write_grid_manifest(tmp_path, 2, 2, skip={(1, 0)})
    with pytest.raises(ValueError, match=r"\(1, 0\)"):
        build_mask_set(manifest, align_for([2]), 0.3, (8, 8))


def test_cross_attention_map_validation():
    with pytest.raises(ValueError, match="inconsistent"):
        CrossAttentionMap(tensor=np.ones((1, 4, 2)), layer=0, timestep=0, spatial=(3, 3))
    attn = make_map(np.full((1, 4, 2), 0.5))
    attn.validate_row_sums(tol=1e-2)
    bad = make_map(np.full((1, 4, 2), 0.9))
    with pytest.raises(ValueError, match="rows sum"):
        bad.validate_row_sums(tol=1e-2)


def test_dump_candidate_pngs(tmp_path):
    manifest = write_grid_manifest(tmp_path, 1, 1)
    mask_set = build_mask_set(manifest, align_for([2]), 0.3, (8, 8))
    extraction.dump_candidate_pngs(mask_set, tmp_path / "pngs")
    assert sorted(p.name for p in (tmp_path / "pngs").iterdir()) == [
        "t0_l0_f0.png",
        "t0_l0_f1.png",
    ]

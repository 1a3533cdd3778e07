"""Acceptance suite: every release criterion at its stated tolerance.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one PASS/FAIL
line per criterion.
"""

import json
import os
import struct
import subprocess
import sys
import time
from contextlib import contextmanager

import numpy as np
import pytest

from maskmatch import dumpio, mmc
from maskmatch.blending import (
    TempAttentionState,
    blend_cross,
    blend_latent,
    blend_self,
    blend_temp,
    unwrap,
)
from maskmatch.cli import main as cli_main
from maskmatch.evaluation import masked_psnr
from maskmatch.kernels import masked_select
from maskmatch.pipeline.codec import PatchCodec
from maskmatch.pipeline.denoiser import ToyDenoiser
from maskmatch.pipeline.loops import EditConfig, edit, invert, replay, sample
from maskmatch.pipeline.schedule import linear_schedule
from maskmatch.pipeline.synthetic import moving_square


@contextmanager
def criterion(name):
    try:
        yield
    except Exception:
        print(f"FAIL  {name}")
        raise
    print(f"PASS  {name}")


def rel_l2(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


@pytest.fixture(scope="module")
def pipeline50():
    """T=50 inversion of the standard toy scene (F=4, 16x16 latent)."""
    video, masks, color = moving_square(frames=4, size=64, seed=0)
    prompt = f"a {color} square moving"
    codec = PatchCodec(0)
    z0 = codec.encode(video)
    denoiser = ToyDenoiser(0, latent_size=16)
    schedule = linear_schedule(50)
    z_t, cache, _ = invert(z0, prompt, denoiser, schedule)
    return {
        "video": video,
        "masks": masks,
        "prompt": prompt,
        "codec": codec,
        "z0": z0,
        "z_t": z_t,
        "cache": cache,
        "denoiser": denoiser,
        "schedule": schedule,
    }


def test_iou_oracle_equivalence():
    with criterion("IoU oracle equivalence (1000 random pairs, exact)"):
        rng = np.random.default_rng(42)
        start = time.perf_counter()
        for _ in range(1000):
            shape = (
                int(rng.integers(1, 5)),
                int(rng.integers(1, 9)),
                int(rng.integers(1, 9)),
            )
            a = rng.random(shape) < rng.random()
            b = rng.random(shape) < rng.random()
            got = mmc.miou(a, b)
            sa = {tuple(i) for i in np.argwhere(a)}
            sb = {tuple(i) for i in np.argwhere(b)}
            expected = 1.0 if not (sa | sb) else len(sa & sb) / len(sa | sb)
            assert abs(got - expected) <= 1e-12
        elapsed = time.perf_counter() - start
        assert elapsed < 5.0, f"took {elapsed:.2f}s"


def test_profiler_recovery():
    with criterion("profiler recovery (planted l*=2, t*=40)"):
        start = time.perf_counter()
        t_steps, layers = 50, 5
        d = np.empty((t_steps, layers))
        for t in range(t_steps):
            for l in range(layers):
                d[t, l] = 0.3 + 0.001 * ((t * layers + l) % 7) / 7.0
        d[:, 2] += 0.15  # layer 2 strictly dominates every timestep
        d[40, :] += 0.15  # timestep 40 strictly dominates every layer
        layer_costs = mmc.lmmc(d)
        timestep_costs = mmc.tmmc(d)
        assert mmc.select_layer(layer_costs) == 2
        assert mmc.select_timestep(timestep_costs) == 40
        np.testing.assert_array_equal(mmc.tmmc(d), mmc.lmmc(d.T))
        elapsed = time.perf_counter() - start
        assert elapsed < 1.0, f"took {elapsed:.2f}s"


def test_cost_arithmetic_hand_cases():
    with criterion("cost arithmetic hand cases (1.5 and 3.0 exact)"):
        assert mmc.lmmc(np.array([[0.5], [1.0]]))[0] == 1.5
        assert mmc.tmmc(np.array([[0.25, 0.5]]))[0] == 3.0


def test_blend_boundary_identities():
    with criterion("blend boundary identities (5 ops x 100 random tensors)"):
        rng = np.random.default_rng(7)
        pos, frames, dim, tokens = 16, 3, 5, 4
        for _ in range(100):
            zeros = np.zeros((pos, frames))
            ones = np.ones((pos, frames))

            src = rng.normal(size=(frames, 2, 4, 4))
            edit_t = rng.normal(size=src.shape)
            np.testing.assert_array_equal(masked_select(src, edit_t, 0.0), src)
            np.testing.assert_array_equal(masked_select(src, edit_t, 1.0), edit_t)

            s_state = TempAttentionState(
                k=rng.normal(size=(pos, frames, dim)), q=rng.normal(size=(pos, frames, dim))
            )
            e_state = TempAttentionState(
                k=rng.normal(size=(pos, frames, dim)), q=rng.normal(size=(pos, frames, dim))
            )
            out0 = blend_temp(s_state, e_state, zeros)
            out1 = blend_temp(s_state, e_state, ones)
            np.testing.assert_array_equal(out0.k, s_state.k)
            np.testing.assert_array_equal(out0.q, s_state.q)
            np.testing.assert_array_equal(out1.k, e_state.k)
            np.testing.assert_array_equal(out1.q, e_state.q)

            src_c = rng.random((frames, pos, tokens))
            edit_c = rng.random((frames, pos, tokens))
            np.testing.assert_array_equal(blend_cross(src_c, edit_c, zeros), src_c)
            np.testing.assert_array_equal(blend_cross(src_c, edit_c, ones), edit_c)

            src_s = rng.random((frames, pos, pos))
            edit_s = rng.random((frames, pos, pos))
            np.testing.assert_array_equal(blend_self(src_s, edit_s, zeros, "attribute"), src_s)
            np.testing.assert_array_equal(blend_self(src_s, edit_s, ones, "attribute"), edit_s)

            src_z = rng.normal(size=(frames, 4, 4, 4))
            edit_z = rng.normal(size=src_z.shape)
            zero_m = np.zeros((frames, 4, 4), bool)
            one_m = np.ones((frames, 4, 4), bool)
            np.testing.assert_array_equal(blend_latent(src_z, edit_z, zero_m, 0, 1), src_z)
            np.testing.assert_array_equal(blend_latent(src_z, edit_z, one_m, 0, 1), edit_z)


def test_row_stochasticity_preserved():
    with criterion("cross blend keeps rows stochastic (< 1e-6)"):
        rng = np.random.default_rng(8)
        worst = 0.0
        for _ in range(50):
            raw_s = rng.random((3, 16, 6))
            raw_e = rng.random((3, 16, 6))
            src = raw_s / raw_s.sum(axis=-1, keepdims=True)
            edit_m = raw_e / raw_e.sum(axis=-1, keepdims=True)
            m = (rng.random((16, 3)) < 0.5).astype(np.float64)
            out = blend_cross(src, edit_m, m)
            worst = max(worst, float(np.abs(out.sum(axis=-1) - 1.0).max()))
        assert worst < 1e-6, f"worst row-sum deviation {worst:.2e}"


def test_zeroed_unwrap_identity():
    with criterion("delta=1 zeroes the unwrap; temp blend returns source exactly"):
        rng = np.random.default_rng(9)
        for _ in range(100):
            mask = rng.random((3, 32, 32)) < rng.random()
            m = unwrap(mask, (4, 4), delta=1)
            assert not m.any()
        s_state = TempAttentionState(
            k=rng.normal(size=(16, 3, 5)), q=rng.normal(size=(16, 3, 5))
        )
        e_state = TempAttentionState(
            k=rng.normal(size=(16, 3, 5)), q=rng.normal(size=(16, 3, 5))
        )
        m = unwrap(rng.random((3, 32, 32)) < 0.5, (4, 4), delta=1)
        out = blend_temp(s_state, e_state, m)
        np.testing.assert_array_equal(out.k, s_state.k)
        np.testing.assert_array_equal(out.q, s_state.q)


def test_replay_identity_t50(pipeline50):
    with criterion("DDIM replay identity (T=50, rel L2 < 1e-5)"):
        z_rec = replay(pipeline50["z_t"], pipeline50["cache"], pipeline50["schedule"])
        err = rel_l2(z_rec, pipeline50["z0"])
        assert err < 1e-5, f"replay error {err:.3e}"


def test_fresh_round_trip_t50(pipeline50):
    with criterion("DDIM fresh round trip (T=50, rel L2 < 0.05)"):
        z_rec = sample(
            pipeline50["z_t"],
            pipeline50["prompt"],
            pipeline50["denoiser"],
            pipeline50["schedule"],
            guidance=1.0,
        )
        err = rel_l2(z_rec, pipeline50["z0"])
        assert err < 0.05, f"fresh round-trip error {err:.3e}"


def test_full_fusion_collapse(pipeline50, tmp_path):
    with criterion("full-fusion collapse (P1=P0, alpha=1, rel L2 < 1e-4)"):
        # guidance matches the inversion convention (scale 1); guidance
        # extrapolation runs outside the cached-feature span by design
        config = EditConfig(
            steps=50,
            guidance=1.0,
            alpha_s=1.0,
            alpha_c=1.0,
            alpha_t=1.0,
            task="attribute",
            seed=0,
        )
        profile = mmc.aggregate_profiles(
            [0.2 + 0.6 * np.random.default_rng(10).random((50, 5))], model_id="toy-0"
        )
        result = edit(
            pipeline50["video"],
            pipeline50["prompt"],
            pipeline50["prompt"],
            "square",
            "square",
            config,
            profile,
            tmp_path,
        )
        z_rec = replay(pipeline50["z_t"], pipeline50["cache"], pipeline50["schedule"])
        recon = pipeline50["codec"].decode(z_rec)
        err = rel_l2(result.video, recon)
        assert err < 1e-4, f"collapse error {err:.3e}"


def test_masked_psnr_criteria():
    with criterion("masked PSNR (scalar agreement 1e-9; 0.1 offset = 20 dB)"):
        rng = np.random.default_rng(11)
        x0 = rng.random((2, 3, 6, 6))
        x1 = np.clip(x0 + rng.normal(scale=0.07, size=x0.shape), 0, 1)
        full = np.ones((2, 6, 6), bool)
        total = 0.0
        for a, b in zip(x1.reshape(-1), x0.reshape(-1)):
            total += (a - b) ** 2
        scalar = 10.0 * np.log10(1.0 / (total / x0.size))
        assert abs(masked_psnr(x1, x0, full) - scalar) <= 1e-9

        x0 = np.zeros((1, 3, 4, 4))
        x1 = np.full_like(x0, 0.1)
        assert masked_psnr(x1, x0, np.ones((1, 4, 4), bool)) == pytest.approx(20.0, abs=1e-9)


@pytest.fixture(scope="module")
def smoke_profile(tmp_path_factory):
    root = tmp_path_factory.mktemp("smoke")
    ds = root / "ds"
    assert cli_main(["gen-fixtures", "--out", str(ds), "--videos", "2"]) == 0
    prof = root / "prof"
    assert cli_main(["mmc-profile", "--dataset", str(ds), "--out", str(prof), "--steps", "50"]) == 0
    return prof / "profile.json"


def test_end_to_end_smoke(smoke_profile, tmp_path):
    with criterion("end-to-end smoke (< 60 s single-threaded, byte-identical reruns)"):
        env = dict(os.environ)
        env.update(
            OMP_NUM_THREADS="1",
            OPENBLAS_NUM_THREADS="1",
            MKL_NUM_THREADS="1",
        )
        env.pop("MASKMATCH_OUT", None)
        outputs = []
        for run in ("a", "b"):
            out = tmp_path / run
            cmd = [
                sys.executable, "-m", "maskmatch.cli", "edit",
                "--synthetic", "moving-square", "--steps", "50",
                "--profile", str(smoke_profile), "--out", str(out),
            ]
            start = time.perf_counter()
            proc = subprocess.run(cmd, capture_output=True, text=True, env=env)
            elapsed = time.perf_counter() - start
            assert proc.returncode == 0, proc.stderr
            assert elapsed < 60.0, f"run took {elapsed:.1f}s"
            outputs.append(out)
        # 50 steps x 5 layers of cross-attention dumps per inversion
        assert len(list((outputs[0] / "dumps").glob("*.attn"))) == 250
        frames_a = sorted((outputs[0] / "frames").glob("*.png"))
        frames_b = sorted((outputs[1] / "frames").glob("*.png"))
        assert [f.name for f in frames_a] == [f.name for f in frames_b]
        for fa, fb in zip(frames_a, frames_b):
            assert fa.read_bytes() == fb.read_bytes()


def test_interchange_round_trip(tmp_path):
    with criterion("interchange round trip (100 tensors; 3 distinct error codes)"):
        rng = np.random.default_rng(12)
        for i in range(100):
            ndim = int(rng.integers(1, 4))
            shape = tuple(int(rng.integers(1, 6)) for _ in range(ndim))
            tensor = rng.normal(size=shape).astype(np.float32)
            back = dumpio.decode_dump(dumpio.encode_dump(tensor))
            assert back.shape == tensor.shape
            assert back.tobytes() == tensor.tobytes()

        data = dumpio.encode_dump(np.ones(4, dtype=np.float32))
        seen = set()
        for blob, expected in (
            (b"XTTN" + data[4:], "bad_magic"),
            (data[:4] + struct.pack("<I", 2) + data[8:], "unsupported_version"),
            (data[:8] + bytes([1]) + data[9:], "unsupported_dtype"),
        ):
            with pytest.raises(dumpio.DumpError) as err:
                dumpio.decode_dump(blob)
            assert err.value.code == expected
            seen.add(err.value.code)
        assert len(seen) == 3

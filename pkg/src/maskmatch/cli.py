"""Operator surface.

Subcommands: mmc-profile, select-masks, edit, eval, gen-fixtures,
validate-dump. Exit codes: 0 success, 2 input error, 3 missing
prerequisite, 4 internal invariant violation. MASKMATCH_OUT overrides
--out; a --config file of key=value lines supplies defaults that explicit
flags override.
"""

import argparse
import json
import os
import sys
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import dumpio, evaluation, extraction, mmc
from .pipeline import frames as frames_io
from .pipeline.loops import EditConfig, edit, profile_video
from .pipeline.synthetic import moving_square, write_fixture_dataset


class PrerequisiteError(RuntimeError):
    """A required earlier stage has not been run."""


EXIT_OK = 0
EXIT_INPUT = 2
EXIT_PREREQ = 3
EXIT_INTERNAL = 4

# flags whose defaults a --config file may override (dest names)
CONFIG_KEYS = {
    "model_seed",
    "steps",
    "tau",
    "guidance",
    "alpha_s",
    "alpha_c",
    "alpha_t",
    "frames",
    "resolution",
    "jobs",
    "task",
    "latent_cutoff",
}


def _read_config_file(path):
    overrides = {}
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        dest = key.replace("-", "_")
        if dest not in CONFIG_KEYS:
            raise ValueError(f"{path}:{lineno}: unknown config key {key!r}")
        overrides[dest] = value
    return overrides


def _add_model_flags(p, steps=True):
    p.add_argument("--model-seed", type=int, default=0, help="seed fixing all model weights and scenes")
    if steps:
        p.add_argument("--steps", type=int, default=50, help="inversion/sampling step count")
    p.add_argument("--tau", type=float, default=0.3, help="attention-mask binarization threshold")


def _add_alpha_flags(p):
    p.add_argument("--guidance", type=float, default=7.5, help="classifier-free guidance scale")
    p.add_argument("--alpha-s", type=float, default=0.99, help="self-attention blend fraction of steps")
    p.add_argument("--alpha-c", type=float, default=0.99, help="cross-attention blend fraction of steps")
    p.add_argument("--alpha-t", type=float, default=0.99, help="temp-attention blend fraction of steps")
    p.add_argument("--latent-cutoff", type=int, default=0, help="masked latent fusion for the first N steps (0 = off)")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="maskmatch",
        description="Profile attention-mask precision, select masks, and run mask-guided edits.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    parser.add_argument("--config", help="key=value file supplying flag defaults")
    sub = parser.add_subparsers(dest="command", required=True)
    subparsers = {}

    p = sub.add_parser(
        "gen-fixtures",
        help="write a synthetic dataset (frames, annotations, prompts.json)",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    p.add_argument("--out", required=True, help="dataset directory to create")
    p.add_argument("--videos", type=int, default=2, help="number of synthetic clips")
    p.add_argument("--frames", type=int, default=4, help="frames per clip")
    p.add_argument("--resolution", type=int, default=64, help="square frame size in pixels")
    _add_model_flags(p, steps=False)
    p.set_defaults(func=cmd_gen_fixtures)
    subparsers["gen-fixtures"] = p

    p = sub.add_parser(
        "mmc-profile",
        help="profile candidate-mask precision over a dataset and select l*/t*",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    p.add_argument("--dataset", required=True, help="dataset directory (see gen-fixtures layout)")
    p.add_argument("--prompts", default=None, help="prompts.json (default: <dataset>/prompts.json)")
    p.add_argument("--out", required=True, help="output directory for profile.json and reports")
    p.add_argument("--jobs", type=int, default=1, help="per-video worker processes")
    p.add_argument(
        "--aggregate",
        choices=("mean_iou", "mean_cost"),
        default="mean_iou",
        help="cross-video reduction order",
    )
    p.add_argument("--plots", action="store_true", help="also write PNG cost curves")
    _add_model_flags(p)
    p.set_defaults(func=cmd_mmc_profile)
    subparsers["mmc-profile"] = p

    p = sub.add_parser(
        "select-masks",
        help="select per-timestep masks from dumps using a computed profile",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    p.add_argument("--dumps", required=True, help="dump manifest.json (or its directory)")
    p.add_argument("--profile", required=True, help="profile.json from mmc-profile")
    p.add_argument("--word0", required=True, help="object word in the source prompt")
    p.add_argument("--word1", required=True, help="object word in the edit prompt")
    p.add_argument("--resolution", type=int, default=64, help="mask resolution (square)")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--dump-masks", action="store_true", help="also write every candidate as PNG")
    _add_model_flags(p, steps=False)
    p.set_defaults(func=cmd_select_masks)
    subparsers["select-masks"] = p

    p = sub.add_parser(
        "edit",
        help="run the full mask-guided edit on a video or synthetic scene",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--video", help="directory of source PNG frames")
    src.add_argument("--synthetic", choices=("moving-square",), help="use a built-in scene")
    p.add_argument("--prompt0", default=None, help="source prompt (default: derived for synthetic scenes)")
    p.add_argument("--prompt1", default=None, help="edit prompt (default: same as --prompt0)")
    p.add_argument("--word0", default=None, help="object word in the source prompt")
    p.add_argument("--word1", default=None, help="object word in the edit prompt")
    p.add_argument("--task", choices=("stylization", "attribute", "shape"), default="attribute")
    p.add_argument("--profile", required=True, help="profile.json from mmc-profile")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--frames", type=int, default=4, help="frame count for synthetic scenes")
    p.add_argument("--resolution", type=int, default=64, help="frame size for synthetic scenes")
    _add_model_flags(p)
    _add_alpha_flags(p)
    p.set_defaults(func=cmd_edit)
    subparsers["edit"] = p

    p = sub.add_parser(
        "eval",
        help="score an edit with masked PSNR",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    p.add_argument("--edited", required=True, help="edited frames directory")
    p.add_argument("--source", required=True, help="source frames directory")
    p.add_argument("--annotation", default=None, help="object annotation PNGs (required unless stylization)")
    p.add_argument("--task", choices=("stylization", "attribute", "shape"), required=True)
    p.add_argument("--out", default=None, help="metrics.json path (default: stdout only)")
    p.set_defaults(func=cmd_eval)
    subparsers["eval"] = p

    p = sub.add_parser(
        "validate-dump",
        help="validate a dump directory against the interchange format rules",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    p.add_argument("path", help="manifest.json or a directory containing one")
    p.set_defaults(func=cmd_validate_dump)
    subparsers["validate-dump"] = p

    return parser, subparsers


def _resolve_out(args):
    env = os.environ.get("MASKMATCH_OUT")
    out = env if env else getattr(args, "out", None)
    if out is None:
        raise ValueError("no output directory: pass --out or set MASKMATCH_OUT")
    return Path(out)


def _edit_config(args):
    return EditConfig(
        steps=args.steps,
        tau=args.tau,
        guidance=getattr(args, "guidance", 7.5),
        alpha_s=getattr(args, "alpha_s", 0.99),
        alpha_c=getattr(args, "alpha_c", 0.99),
        alpha_t=getattr(args, "alpha_t", 0.99),
        seed=args.model_seed,
        task=getattr(args, "task", "attribute"),
        latent_cutoff=getattr(args, "latent_cutoff", 0),
    )


def cmd_gen_fixtures(args):
    out = _resolve_out(args)
    write_fixture_dataset(
        out,
        videos=args.videos,
        frames=args.frames,
        size=args.resolution,
        seed=args.model_seed,
    )
    print(f"wrote {args.videos} synthetic clips under {out}")
    return EXIT_OK


def _profile_job(payload):
    # top-level for pickling; reconstructs light objects inside the worker
    video = frames_io.load_video(payload["frames_dir"])
    reference = dumpio.load_reference_masks(payload["annotation_dir"], video.shape[0])
    config = EditConfig(steps=payload["steps"], tau=payload["tau"], seed=payload["seed"])
    return profile_video(
        video,
        reference,
        payload["prompt"],
        payload["word"],
        config,
        payload["dump_dir"],
        model_id=payload["model_id"],
    )


def cmd_mmc_profile(args):
    dataset = Path(args.dataset)
    prompts_path = Path(args.prompts) if args.prompts else dataset / "prompts.json"
    if not prompts_path.exists():
        raise ValueError(f"prompts file not found: {prompts_path}")
    with open(prompts_path, encoding="utf-8") as f:
        prompts = json.load(f)
    out = _resolve_out(args)
    model_id = f"toy-{args.model_seed}"

    jobs = []
    for name in sorted(prompts):
        frames_dir = dataset / name / "frames"
        annotation_dir = dataset / name / "annotations"
        if not frames_dir.is_dir():
            raise ValueError(f"video {name}: missing frames directory {frames_dir}")
        if not annotation_dir.is_dir():
            raise ValueError(f"video {name}: missing annotations directory {annotation_dir}")
        jobs.append(
            {
                "frames_dir": frames_dir,
                "annotation_dir": annotation_dir,
                "prompt": prompts[name]["prompt"],
                "word": prompts[name]["word"],
                "steps": args.steps,
                "tau": args.tau,
                "seed": args.model_seed,
                "dump_dir": out / "dumps" / name,
                "model_id": model_id,
            }
        )

    start = time.perf_counter()
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            matrices = list(pool.map(_profile_job, jobs))
    else:
        matrices = [_profile_job(j) for j in jobs]
    profile = mmc.aggregate_profiles(matrices, model_id=model_id, aggregate=args.aggregate)
    profile.save(out / "profile.json")
    evaluation.emit_report(profile, out, per_video=matrices, plots=args.plots)
    elapsed = time.perf_counter() - start
    print(
        f"profiled {len(jobs)} videos in {elapsed:.1f}s: "
        f"l*={profile.l_star} t*={profile.t_star} -> {out / 'profile.json'}"
    )
    return EXIT_OK


def _manifest_path(path):
    path = Path(path)
    if path.is_dir():
        path = path / "manifest.json"
    return path


def cmd_select_masks(args):
    profile_path = Path(args.profile)
    if not profile_path.exists():
        raise PrerequisiteError(f"profile {profile_path} not found: run mmc-profile first")
    profile = mmc.MMCProfile.load(profile_path)
    manifest_path = _manifest_path(args.dumps)
    entries = dumpio.read_manifest(manifest_path)
    tokenization = [(tok, i) for i, tok in enumerate(entries[0].token_strings)]
    prompt = " ".join(t for t, _ in tokenization[1:])
    align = dumpio.align_token(prompt, args.word0, tokenization)

    resolution = (args.resolution, args.resolution)
    mask_set = extraction.build_mask_set(manifest_path, align, args.tau, resolution)
    delta = mmc.semantic_delta(args.word0, args.word1)
    selected = mmc.select_masks(mask_set, profile, delta)

    out = _resolve_out(args)
    out.mkdir(parents=True, exist_ok=True)
    from PIL import Image

    for t, grid in enumerate(selected.masks):
        for f in range(grid.shape[0]):
            Image.fromarray(grid[f].astype(np.uint8) * 255).save(
                out / f"selected_t{t:03d}_f{f}.png"
            )
    if args.dump_masks:
        extraction.dump_candidate_pngs(mask_set, out / "candidates")
    with open(out / "selection.json", "w", encoding="utf-8") as f:
        json.dump(
            {
                "mode": selected.mode,
                "delta": delta,
                "l_star": selected.l_star,
                "t_star": selected.t_star,
                "steps": mask_set.steps,
                "layers": mask_set.layers,
            },
            f,
            indent=1,
        )
        f.write("\n")
    print(f"selected {selected.mode} masks (l*={selected.l_star}, t*={selected.t_star})")
    return EXIT_OK


def cmd_edit(args):
    profile_path = Path(args.profile)
    if not profile_path.exists():
        raise PrerequisiteError(f"profile {profile_path} not found: run mmc-profile first")
    profile = mmc.MMCProfile.load(profile_path)
    out = _resolve_out(args)

    if args.synthetic:
        video, _, color = moving_square(args.frames, args.resolution, seed=args.model_seed)
        prompt0 = args.prompt0 or f"a {color} square moving"
        word0 = args.word0 or "square"
    else:
        video = frames_io.load_video(args.video)
        if not args.prompt0 or not args.word0:
            raise ValueError("--prompt0 and --word0 are required with --video")
        prompt0 = args.prompt0
        word0 = args.word0
    prompt1 = args.prompt1 or prompt0
    word1 = args.word1 or word0

    config = _edit_config(args)
    start = time.perf_counter()
    result = edit(video, prompt0, prompt1, word0, word1, config, profile, out)
    elapsed = time.perf_counter() - start

    frames_io.save_video(np.clip(result.video, 0.0, 1.0), out / "frames")
    metadata = {
        "prompt0": prompt0,
        "prompt1": prompt1,
        "word0": word0,
        "word1": word1,
        "delta": result.delta,
        "mask_mode": result.mode,
        "mask_candidates": result.mask_set_size,
        "profile": {
            "model_id": profile.model_id,
            "l_star": profile.l_star,
            "t_star": profile.t_star,
        },
        "config": {
            "steps": config.steps,
            "tau": config.tau,
            "guidance": config.guidance,
            "alpha_s": config.alpha_s,
            "alpha_c": config.alpha_c,
            "alpha_t": config.alpha_t,
            "seed": config.seed,
            "task": config.task,
            "latent_cutoff": config.latent_cutoff,
        },
        "timings": {"edit_s": round(elapsed, 3)},
    }
    with open(out / "metadata.json", "w", encoding="utf-8") as f:
        json.dump(metadata, f, indent=1)
        f.write("\n")
    print(f"edited with {result.mode} masks in {elapsed:.1f}s -> {out / 'frames'}")
    return EXIT_OK


def cmd_eval(args):
    edited = frames_io.load_video(args.edited)
    source = frames_io.load_video(args.source)
    if edited.shape != source.shape:
        raise ValueError(f"video shapes differ: {edited.shape} vs {source.shape}")
    if args.task == "stylization":
        mask = np.ones((edited.shape[0],) + edited.shape[2:], dtype=bool)
    else:
        if not args.annotation:
            raise ValueError("--annotation is required for attribute/shape tasks")
        annotation = dumpio.load_reference_masks(args.annotation, edited.shape[0])
        mask = evaluation.psnr_mask_for_task(annotation, args.task)
    value = evaluation.masked_psnr(edited, source, mask)
    metrics = {
        "masked_psnr": value,
        "task": args.task,
        "clip_score": None,
        "temp_consistency": None,
        "lpips": None,
    }
    print(json.dumps(metrics, indent=1))
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            json.dump(metrics, f, indent=1)
            f.write("\n")
    return EXIT_OK


def cmd_validate_dump(args):
    manifest_path = _manifest_path(args.path)
    if not manifest_path.exists():
        raise ValueError(f"manifest not found: {manifest_path}")
    problems = dumpio.validate_manifest(manifest_path)
    if problems:
        for p in problems:
            print(p, file=sys.stderr)
        print(f"{len(problems)} problem(s) found", file=sys.stderr)
        return EXIT_INPUT
    print("ok")
    return EXIT_OK


def main(argv=None):
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)

    parser, subparsers = build_parser()
    if known.config:
        try:
            overrides = _read_config_file(known.config)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return EXIT_INPUT
        for sp in subparsers.values():
            valid = {a.dest for a in sp._actions}
            sp.set_defaults(**{k: _coerce(sp, k, v) for k, v in overrides.items() if k in valid})

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except PrerequisiteError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PREREQ
    except (ValueError, OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception:  # noqa: BLE001 - anything else is an internal defect
        traceback.print_exc()
        return EXIT_INTERNAL


def _coerce(subparser, dest, value):
    for action in subparser._actions:
        if action.dest == dest and action.type is not None:
            return action.type(value)
    return value


if __name__ == "__main__":
    sys.exit(main())

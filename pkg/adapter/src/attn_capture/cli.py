"""Capture CLI: export cross-attention maps from a host pipeline into the
interchange format, and validate captures before handing them off."""

import argparse
import sys
from pathlib import Path

from .capture import capture_run
from .stub_host import load_host
from .validate import validate_manifest


def _count_frames(video_dir):
    video_dir = Path(video_dir)
    frames = sorted(p for p in video_dir.iterdir() if p.suffix.lower() == ".png")
    if not frames:
        raise ValueError(f"no PNG frames in {video_dir}")
    return len(frames)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="attn-capture",
        description="Export head-averaged cross-attention maps during DDIM inversion.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("capture", help="run the host's inversion and dump every map")
    p.add_argument("--model", default="stub", help="host pipeline id")
    p.add_argument("--video", required=True, help="directory of source PNG frames")
    p.add_argument("--prompt", required=True, help="source prompt")
    p.add_argument("--steps", type=int, default=50, help="inversion step count")
    p.add_argument("--seed", type=int, default=0, help="host seed (stub host)")
    p.add_argument("--out", required=True, help="dump output directory")
    p.set_defaults(func=cmd_capture)

    p = sub.add_parser("validate", help="check a capture against the format rules")
    p.add_argument("path", help="manifest.json or a directory containing one")
    p.set_defaults(func=cmd_validate)
    return parser


def cmd_capture(args):
    host = load_host(args.model, seed=args.seed)
    frames = _count_frames(args.video)
    manifest = capture_run(host, frames, args.prompt, args.steps, args.out)
    print(f"captured {args.steps} steps from {args.model} -> {manifest}")
    return 0


def cmd_validate(args):
    problems = validate_manifest(args.path)
    if problems:
        for p in problems:
            print(p, file=sys.stderr)
        return 2
    print("ok")
    return 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

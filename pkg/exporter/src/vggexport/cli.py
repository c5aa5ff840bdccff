"""Command line for the exporter.

    vggexport export --image p.png --layers relu4_1[,relu3_1] --out dir [--size 224]
    vggexport export-weights --cut relu4_1 --out dir

Both commands need pretrained VGG-19 weights available locally; pass
--random-seed N to substitute a seeded randomly initialized network for
development and tests.
"""

from __future__ import annotations

import argparse
import sys

from .export import ModelUnavailable, UnknownLayer, export_features, export_weights


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vggexport", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    e = sub.add_parser("export", help="export layer activations for one image")
    e.add_argument("--image", required=True)
    e.add_argument("--layers", required=True, help="comma-separated layer names, e.g. relu4_1")
    e.add_argument("--out", required=True)
    e.add_argument("--size", type=int, default=224)
    e.add_argument("--random-seed", type=int, default=None)

    w = sub.add_parser("export-weights", help="export conv weights up to a cut layer")
    w.add_argument("--cut", required=True)
    w.add_argument("--out", required=True)
    w.add_argument("--random-seed", type=int, default=None)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "export":
            manifest = export_features(
                args.image, [s for s in args.layers.split(",") if s], args.out,
                size=args.size, random_seed=args.random_seed,
            )
        else:
            manifest = export_weights(args.cut, args.out, random_seed=args.random_seed)
    except UnknownLayer as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except ModelUnavailable as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    print(f"wrote {manifest}")
    return 0


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()

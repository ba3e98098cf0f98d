"""detexport command line: `export` a checkpoint, or generate a `dataset`."""

from __future__ import annotations

import argparse
import sys

from detexport.dataset import make_synthetic_dataset, write_dataset
from detexport.export import ExportError, UnsupportedLayerError, export


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="detexport", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_export = sub.add_parser("export", help="convert a torch checkpoint to model.json")
    p_export.add_argument("--checkpoint", required=True, help="torch.save'd nn.Sequential")
    p_export.add_argument("--manifest", required=True, help="head metadata JSON")
    p_export.add_argument("--out", required=True, help="output directory")

    p_dataset = sub.add_parser("dataset", help="generate a synthetic single-object dataset")
    p_dataset.add_argument("--n", type=int, required=True)
    p_dataset.add_argument("--seed", type=int, default=0)
    p_dataset.add_argument("--size", type=int, default=16)
    p_dataset.add_argument("--out", required=True)

    args = parser.parse_args(argv)
    try:
        if args.command == "export":
            path = export(args.checkpoint, args.manifest, args.out)
            print(f"wrote {path}")
            return 0
        samples = make_synthetic_dataset(args.n, args.seed, args.size)
        path = write_dataset(samples, args.out)
        print(f"wrote {len(samples)} images, annotations at {path}")
        return 0
    except (ExportError, UnsupportedLayerError, ValueError, OSError) as exc:
        print(f"detexport: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

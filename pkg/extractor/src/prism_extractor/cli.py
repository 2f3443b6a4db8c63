"""prism-extract: dump teacher-forced artifacts from a checkpoint."""

from __future__ import annotations

import argparse
import sys

from .extract import ExtractionJob, extract
from .model import make_toy_checkpoint


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="prism-extract")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="extract features/head/labels from a checkpoint")
    p.add_argument("--model", required=True, help="checkpoint file")
    p.add_argument("--prompts", required=True, help="JSON-lines prompts (context, target)")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--max-samples", type=int)
    p.add_argument("--dtype", choices=("f32", "f64"), default="f32")
    p.add_argument("--variant-id")

    p = sub.add_parser("make-toy", help="write a randomly initialized toy checkpoint")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--d-model", type=int, default=32)
    p.add_argument("--layers", type=int, default=2)
    p.add_argument("--heads", type=int, default=4)

    args = parser.parse_args(argv)
    try:
        if args.command == "make-toy":
            make_toy_checkpoint(args.out, seed=args.seed, d_model=args.d_model,
                                n_layers=args.layers, n_heads=args.heads)
            print(f"wrote {args.out}")
            return 0
        summary = extract(ExtractionJob(
            model_ref=args.model,
            prompts_path=args.prompts,
            output_dir=args.out_dir,
            max_samples=args.max_samples,
            dtype=args.dtype,
            variant_id=args.variant_id,
        ))
        print(f"prompts={summary.n_prompts} skipped={summary.n_skipped} "
              f"rows={summary.n_rows} d={summary.d} V={summary.vocab} "
              f"mean_ce={summary.mean_ce:.6f}")
        print(f"wrote {summary.feature_path}, {summary.head_path}, "
              f"{summary.labels_path}, {summary.manifest_path}")
        return 0
    except (RuntimeError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

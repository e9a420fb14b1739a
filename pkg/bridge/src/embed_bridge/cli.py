"""embed-bridge command line: embed-triplets, embed-images, synth."""

from __future__ import annotations

import argparse
import sys

from .encoders import EncoderUnavailable, available_encoders
from .formats import FormatError
from .pipeline import IdGap, embed_images, embed_triplets, synth_fixture


def cmd_embed_triplets(args: argparse.Namespace) -> int:
    manifest = embed_triplets(args.datastore, args.encoder, args.out)
    print(f"{manifest.count} vectors, dim {manifest.dim} -> {args.out}")
    print(f"sha256 {manifest.sha256}")
    return 0


def cmd_embed_images(args: argparse.Namespace) -> int:
    manifest = embed_images(args.image_dir, args.encoder, args.out)
    print(f"{manifest.count} vectors, dim {manifest.dim} -> {args.out}")
    print(f"sha256 {manifest.sha256}")
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    checksum = synth_fixture(args.out, seed=args.seed, n=args.n,
                             dim=args.dim, n_clusters=args.clusters)
    print(f"{args.n} vectors, dim {args.dim} -> {args.out}")
    print(f"sha256 {checksum}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="embed-bridge")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("embed-triplets",
                       help="encode a KGDS datastore into a KGEB file")
    p.add_argument("--datastore", required=True)
    p.add_argument("--encoder", default="hashed-128",
                   help=f"one of: {', '.join(available_encoders())}")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed_triplets)

    p = sub.add_parser("embed-images",
                       help="encode an image directory into a KGEB file")
    p.add_argument("--image-dir", required=True)
    p.add_argument("--encoder", default="hashed-128")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_embed_images)

    p = sub.add_parser("synth", help="generate a synthetic KGEB fixture")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--n", type=int, default=1000)
    p.add_argument("--dim", type=int, default=128)
    p.add_argument("--clusters", type=int, default=8)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (EncoderUnavailable, FormatError, IdGap, FileNotFoundError,
            ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

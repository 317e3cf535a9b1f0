"""Entry point: serve the evaluation protocol on stdin/stdout."""

import argparse
import sys

from .serve import Server


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="archeval", description=__doc__)
    parser.add_argument("--mode", choices=("toy", "cifar10", "cifar100"), default="toy")
    parser.add_argument("--seed", type=int, default=0, help="base seed pinned per request")
    parser.add_argument("--aux-head", action="store_true", help="auxiliary classifier after the 2nd reduction (final retraining)")
    parser.add_argument("--cutout", action="store_true", help="cutout augmentation (final retraining)")
    args = parser.parse_args(argv)
    server = Server(mode=args.mode, seed=args.seed, aux_head=args.aux_head, use_cutout=args.cutout)
    return server.serve()


if __name__ == "__main__":
    sys.exit(main())

"""CLI: create toy checkpoints and record sessions."""

from __future__ import annotations

import argparse
import sys

from .model import make_toy_checkpoint
from .recorder import AdapterConfig, record_session


def cmd_make_toy(args) -> int:
    make_toy_checkpoint(args.out, vocab_size=args.vocab_size,
                        hidden_dim=args.hidden_dim, seed=args.seed)
    print(f"wrote toy checkpoint to {args.out}")
    return 0


def cmd_record(args) -> int:
    cfg = AdapterConfig(
        checkpoint=args.checkpoint,
        prompt=args.prompt,
        gen_len=args.gen_len,
        block_size=args.block_size,
        steps_per_block=args.steps,
        out_path=args.out,
        device=args.device,
        with_logits=not args.no_logits,
    )
    path = record_session(cfg)
    print(f"recorded session to {path} (+ sidecar {path}.meta.txt)")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fsadapter",
                                     description="Record model sessions into the "
                                                 "FSDUMP interchange format")
    sub = parser.add_subparsers(dest="command", required=True)

    pt = sub.add_parser("make-toy", help="write a random-weight toy checkpoint")
    pt.add_argument("--out", required=True)
    pt.add_argument("--vocab-size", type=int, default=32, dest="vocab_size")
    pt.add_argument("--hidden-dim", type=int, default=16, dest="hidden_dim")
    pt.add_argument("--seed", type=int, default=0)
    pt.set_defaults(func=cmd_make_toy)

    pr = sub.add_parser("record", help="record a decoding session from a checkpoint")
    pr.add_argument("--checkpoint", required=True)
    pr.add_argument("--prompt", type=str, default="")
    pr.add_argument("--gen-len", type=int, default=64, dest="gen_len")
    pr.add_argument("--block-size", type=int, default=64, dest="block_size")
    pr.add_argument("--steps", type=int, default=64)
    pr.add_argument("--out", required=True)
    pr.add_argument("--device", type=str, default="cpu")
    pr.add_argument("--no-logits", action="store_true", dest="no_logits",
                    help="skip logits capture (the scheduler toolkit cannot "
                         "replay such dumps)")
    pr.set_defaults(func=cmd_record)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

"""Command-line interface: ``decode``, ``analyze``, and ``compare``.

Configuration comes from defaults, then an optional flat ``key = value``
config file, then flags (flags win). Exit codes: 0 success, 1 validation
failure, 2 file/format failure, 3 internal error.
"""

from __future__ import annotations

import argparse
import sys

import numpy as np

from . import analysis, dumpio
from .backends import ReplayBackend, TemplateLMBackend, make_template, two_token_sinusoid
from .compare import format_report, run_compare
from .decoder import decode
from .errors import DumpError, ReplayError, ValidationError
from .sampler import SamplerConfig, SamplerKind

BACKENDS = ("sinusoid", "template", "replay")

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_IO = 2
EXIT_INTERNAL = 3


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; route through the validation path instead.
    def error(self, message):
        raise ValidationError(message)


# Keys accepted in a config file, with their coercions. Mirrors the
# decode flags; dashes in flag names map to underscores here.
_CONFIG_KEYS = {
    "backend": str,
    "sampler": str,
    "rho": float,
    "beta_min": float,
    "beta_max": float,
    "epsilon": float,
    "history_len": int,
    "z_scale": float,
    "block_size": int,
    "steps": int,
    "gen_len": int,
    "seed": int,
    "vocab_size": int,
    "embed_dim": int,
    "prompt": str,
    "trace": str,
    "trace_format": str,
    "record_dump": str,
    "dump": str,
    "out": str,
}

_DECODE_DEFAULTS = {
    "backend": "template",
    "sampler": "fourier",
    "rho": 0.2,
    "beta_min": 0.4,
    "beta_max": 0.6,
    "epsilon": 1e-5,
    "history_len": 20,
    "z_scale": 3.0,
    "block_size": 64,
    "steps": 64,
    "gen_len": 64,
    "seed": 0,
    "vocab_size": 32,
    "embed_dim": 16,
    "prompt": "",
    "trace": None,
    "trace_format": "csv",
    "record_dump": None,
    "dump": None,
    "out": None,
}


def parse_config_file(path) -> dict:
    """Flat ``key = value`` file; blank lines and ``#`` comments allowed."""
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as e:
        raise ValidationError(f"cannot read config file {path}: {e}") from None
    for lineno, line in enumerate(lines, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ValidationError(f"{path}:{lineno}: expected 'key = value', got {stripped!r}")
        key, _, raw = stripped.partition("=")
        key = key.strip()
        raw = raw.strip()
        if key not in _CONFIG_KEYS:
            raise ValidationError(f"{path}:{lineno}: unknown config key {key!r}")
        try:
            values[key] = _CONFIG_KEYS[key](raw)
        except ValueError:
            raise ValidationError(
                f"{path}:{lineno}: bad value {raw!r} for key {key!r}"
            ) from None
    return values


def _merged_settings(args) -> dict:
    settings = dict(_DECODE_DEFAULTS)
    if args.config:
        settings.update(parse_config_file(args.config))
    for key in _DECODE_DEFAULTS:
        flag_value = getattr(args, key, None)
        if flag_value is not None:
            settings[key] = flag_value
    return settings


def _validate_decode_settings(s: dict) -> None:
    if s["backend"] not in BACKENDS:
        raise ValidationError(f"backend: expected one of {BACKENDS}, got {s['backend']!r}")
    if s["trace_format"] not in analysis.TRACE_FORMATS:
        raise ValidationError(
            f"trace_format: expected one of {analysis.TRACE_FORMATS}, got {s['trace_format']!r}"
        )
    for key, minimum in (("block_size", 1), ("steps", 1), ("gen_len", 1),
                         ("vocab_size", 2), ("embed_dim", 1), ("history_len", 1)):
        if s[key] < minimum:
            raise ValidationError(f"{key}: must be >= {minimum}, got {s[key]}")
    if s["steps"] > s["block_size"]:
        raise ValidationError(
            f"steps: must not exceed block_size ({s['block_size']}), got {s['steps']}"
        )
    if s["backend"] == "replay" and not s["dump"]:
        raise ValidationError("dump: replay backend requires --dump <path>")


def _sampler_config(s: dict) -> SamplerConfig:
    cfg = SamplerConfig(
        rho=s["rho"],
        beta_min=s["beta_min"],
        beta_max=s["beta_max"],
        epsilon=s["epsilon"],
        history_len=s["history_len"],
        z_scale=s["z_scale"],
        sampler_kind=SamplerKind.from_name(s["sampler"]),
    )
    cfg.validate()
    return cfg


def _parse_prompt(text: str) -> list[int]:
    if not text.strip():
        return []
    try:
        return [int(tok) for tok in text.replace(",", " ").split()]
    except ValueError:
        raise ValidationError(f"prompt: expected whitespace-separated token ids, got {text!r}") from None


def _build_backend(s: dict):
    if s["backend"] == "sinusoid":
        b = s["block_size"]
        return two_token_sinusoid(b, low_pos=b // 4, high_pos=(3 * b) // 4)
    if s["backend"] == "template":
        grammar = make_template(s["gen_len"], seed=s["seed"], vocab_size=s["vocab_size"])
        return TemplateLMBackend(grammar, embed_dim=s["embed_dim"], seed=s["seed"])
    return ReplayBackend(dumpio.read_dump(s["dump"]))


def cmd_decode(args) -> int:
    settings = _merged_settings(args)
    _validate_decode_settings(settings)
    cfg = _sampler_config(settings)
    backend = _build_backend(settings)
    recorder = dumpio.DumpRecorder() if settings["record_dump"] else None

    result = decode(
        backend,
        prompt=_parse_prompt(settings["prompt"]),
        cfg=cfg,
        gen_len=settings["gen_len"],
        block_size=settings["block_size"],
        steps_per_block=settings["steps"],
        seed=settings["seed"],
        recorder=recorder,
    )

    if result.divergent:
        print(
            f"warning: divergent replay at {len(result.divergent_steps)} steps "
            f"(first at step {result.divergent_steps[0]}); recorded activations "
            f"no longer condition on this schedule's commits",
            file=sys.stderr,
        )

    token_line = " ".join(str(t) for t in result.generated)
    if settings["out"]:
        with open(settings["out"], "w", encoding="utf-8") as fh:
            fh.write(token_line + "\n")
    else:
        print(token_line)
    if settings["trace"]:
        data = analysis.export_trace(result.trace, settings["trace_format"])
        with open(settings["trace"], "wb") as fh:
            fh.write(data)
    if recorder is not None:
        dumpio.write_dump(recorder.finish(), settings["record_dump"])
    return EXIT_OK


def _profiles_from_dump(dump: dumpio.DumpFile, step: int):
    from .spectral import HiddenBlock

    if not 0 <= step < dump.num_steps:
        raise ValidationError(f"step: dump has {dump.num_steps} steps, got {step}")
    rec = dump.steps[step]
    block = HiddenBlock(rec.hidden.astype(np.float64))
    if rec.logits is not None:
        tokens = np.argmax(rec.logits, axis=1)
    else:
        tokens = np.full(dump.block_len, -1, dtype=np.int64)
    return rec, block, analysis.build_profiles(block, tokens)


def cmd_analyze(args) -> int:
    if args.top_k < 1:
        raise ValidationError(f"top_k: must be >= 1, got {args.top_k}")
    dump = dumpio.read_dump(args.dump)
    rec, block, profiles = _profiles_from_dump(dump, args.step)
    ratios = analysis.spectral_ratios(block)

    lines = [
        f"dump: {args.dump}",
        f"block={dump.block_len} hidden_dim={dump.hidden_dim} vocab={dump.vocab_size} "
        f"steps={dump.num_steps}",
        f"analyzed step {rec.step_index}: {int(rec.mask.sum())}/{dump.block_len} masked",
        f"block low-frequency energy ratio: {ratios.block_ratio:.6f}",
        "",
        "position  token  r_low     raw       group  zero_energy",
    ]
    for p in profiles:
        raw = ratios.raw[p.position]
        zero = bool(ratios.zero_energy[p.position])
        lines.append(
            f"{p.position:>8}  {p.token:>5}  {p.r_low:.6f}  {raw:.6f}  {p.group:<5}  "
            f"{'yes' if zero else 'no'}"
        )
    for which in ("low", "high"):
        lines.append("")
        lines.append(f"top-{args.top_k} by {which}-frequency ratio:")
        for p in analysis.top_k_profiles(profiles, args.top_k, which):
            lines.append(f"  position {p.position:>4}  token {p.token:>5}  r_low {p.r_low:.6f}")
    if args.labels:
        labels = analysis.read_labels(args.labels)
        stats = analysis.group_stats(profiles, labels)
        lines.append("")
        lines.append("category  low_fraction  high_fraction  count")
        for label, st in stats.items():
            lines.append(
                f"{label:<8}  {st.low_fraction:>12.6f}  {st.high_fraction:>13.6f}  {st.count:>5}"
            )
    report = "\n".join(lines) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(report)
    else:
        print(report, end="")
    return EXIT_OK


def cmd_compare(args) -> int:
    try:
        block_sizes = [int(b) for b in args.block_sizes.split(",") if b.strip()]
    except ValueError:
        raise ValidationError(
            f"block_sizes: expected comma-separated integers, got {args.block_sizes!r}"
        ) from None
    if not block_sizes:
        raise ValidationError("block_sizes: at least one block size required")

    def pick(name):
        value = getattr(args, name)
        return _DECODE_DEFAULTS[name] if value is None else value

    cfg = SamplerConfig(
        rho=pick("rho"), beta_min=pick("beta_min"), beta_max=pick("beta_max"),
        epsilon=pick("epsilon"), history_len=pick("history_len"),
        z_scale=pick("z_scale"),
    )
    cfg.validate()
    report = run_compare(
        gen_len=args.gen_len,
        block_sizes=block_sizes,
        num_seeds=args.num_seeds,
        cfg=cfg,
        vocab_size=args.vocab_size,
        embed_dim=args.embed_dim,
        base_seed=args.seed,
    )
    text = format_report(report)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        print(text, end="")
    return EXIT_OK


def _add_sampler_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--rho", type=float, default=None, help="window bandwidth ratio in (0, 1]")
    p.add_argument("--beta-min", type=float, default=None, dest="beta_min",
                   help="minimum adaptive blend weight")
    p.add_argument("--beta-max", type=float, default=None, dest="beta_max",
                   help="maximum adaptive blend weight")
    p.add_argument("--epsilon", type=float, default=None,
                   help="stability constant in the band-score denominator")
    p.add_argument("--history-len", type=int, default=None, dest="history_len",
                   help="calibrator history length")
    p.add_argument("--z-scale", type=float, default=None, dest="z_scale",
                   help="scale of the percentile-to-z mapping")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fouriersampler",
                     description="Frequency-domain unmasking scheduler toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    pd = sub.add_parser("decode", parents=[], help="run a block-wise decode",
                        description="Run a block-wise decode over a backend and "
                                    "write tokens, trace, and an optional recording.")
    pd.add_argument("--backend", choices=BACKENDS, default=None)
    pd.add_argument("--sampler", choices=["fourier", "confidence", "random", "l2r"],
                    default=None)
    _add_sampler_flags(pd)
    pd.add_argument("--block-size", type=int, default=None, dest="block_size")
    pd.add_argument("--steps", type=int, default=None, help="steps per block")
    pd.add_argument("--gen-len", type=int, default=None, dest="gen_len")
    pd.add_argument("--seed", type=int, default=None)
    pd.add_argument("--vocab-size", type=int, default=None, dest="vocab_size")
    pd.add_argument("--embed-dim", type=int, default=None, dest="embed_dim")
    pd.add_argument("--prompt", type=str, default=None,
                    help="whitespace-separated prompt token ids")
    pd.add_argument("--trace", type=str, default=None, help="trace output path")
    pd.add_argument("--trace-format", choices=list(analysis.TRACE_FORMATS),
                    default=None, dest="trace_format")
    pd.add_argument("--record-dump", type=str, default=None, dest="record_dump",
                    help="record the session to this dump path")
    pd.add_argument("--dump", type=str, default=None,
                    help="input dump for the replay backend")
    pd.add_argument("--out", type=str, default=None, help="token output path")
    pd.add_argument("--config", type=str, default=None,
                    help="flat key = value config file; flags override")
    pd.set_defaults(func=cmd_decode)

    pa = sub.add_parser("analyze", help="spectral analysis of a recorded dump",
                        description="Per-token low-frequency ratios, top-k "
                                    "highlights, and optional category group stats.")
    pa.add_argument("--dump", type=str, required=True)
    pa.add_argument("--step", type=int, default=0,
                    help="which recorded step to analyze (default first)")
    pa.add_argument("--top-k", type=int, default=14, dest="top_k")
    pa.add_argument("--labels", type=str, default=None,
                    help="position<TAB>label file for group stats")
    pa.add_argument("--out", type=str, default=None, help="report output path")
    pa.set_defaults(func=cmd_analyze)

    pc = sub.add_parser("compare", help="compare samplers over seeded templates",
                        description="Run all sampler kinds over seeded templates "
                                    "and report ordering statistics.")
    _add_sampler_flags(pc)
    pc.add_argument("--num-seeds", type=int, default=20, dest="num_seeds")
    pc.add_argument("--gen-len", type=int, default=128, dest="gen_len")
    pc.add_argument("--block-sizes", type=str, default="64", dest="block_sizes",
                    help="comma-separated block sizes to sweep")
    pc.add_argument("--vocab-size", type=int, default=32, dest="vocab_size")
    pc.add_argument("--embed-dim", type=int, default=16, dest="embed_dim")
    pc.add_argument("--seed", type=int, default=0, help="base template seed")
    pc.add_argument("--out", type=str, default=None, help="report output path")
    pc.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except ValidationError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except (DumpError, ReplayError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_IO
    except Exception as e:  # invariant breach
        print(f"internal error: {e}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())

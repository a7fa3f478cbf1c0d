"""Sampler-comparison harness over seeded synthetic templates.

Runs every sampler kind over the same set of seeded templates and block
sizes, and reports per configuration: grammar validity rate, the mean
commit step of structural versus detail slots, and the pairwise deltas
of the detail-minus-struct ordering gap between samplers.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from .backends import DETAIL, STRUCT, TemplateLMBackend, make_template
from .decoder import decode
from .errors import ValidationError
from .sampler import SamplerConfig, SamplerKind

COMPARED_KINDS = (
    SamplerKind.FOURIER,
    SamplerKind.CONFIDENCE,
    SamplerKind.RANDOM,
    SamplerKind.LEFT_TO_RIGHT,
)


@dataclass(frozen=True)
class CompareRow:
    block_size: int
    sampler: SamplerKind
    validity_rate: float
    struct_mean_step: float
    detail_mean_step: float

    @property
    def order_gap(self) -> float:
        """Detail-minus-struct mean commit step; positive = structure first."""
        return self.detail_mean_step - self.struct_mean_step


@dataclass(frozen=True)
class CompareReport:
    rows: tuple[CompareRow, ...]
    num_seeds: int
    gen_len: int

    def row(self, block_size: int, sampler: SamplerKind) -> CompareRow:
        for r in self.rows:
            if r.block_size == block_size and r.sampler == sampler:
                return r
        raise KeyError((block_size, sampler))

    def gap_deltas(self, block_size: int) -> dict[tuple[str, str], float]:
        """Pairwise differences of the ordering gap between samplers."""
        rows = [r for r in self.rows if r.block_size == block_size]
        out = {}
        for a in rows:
            for b in rows:
                if a.sampler.value < b.sampler.value:
                    out[(a.sampler.value, b.sampler.value)] = a.order_gap - b.order_gap
        return out


def commit_steps(trace) -> dict[int, int]:
    """Map position -> global step at which it was committed."""
    return {r.position: r.step for r in trace if r.selected}


def run_compare(
    gen_len: int,
    block_sizes: Sequence[int],
    num_seeds: int,
    cfg: SamplerConfig,
    vocab_size: int = 32,
    embed_dim: int = 16,
    base_seed: int = 0,
) -> CompareReport:
    if num_seeds < 2:
        raise ValidationError(f"num_seeds must be >= 2, got {num_seeds}")
    for b in block_sizes:
        if b < 1 or b > gen_len:
            raise ValidationError(f"block size {b} incompatible with gen_len {gen_len}")

    rows = []
    for block_size in block_sizes:
        per_kind = {kind: {"valid": [], "struct": [], "detail": []} for kind in COMPARED_KINDS}
        for trial in range(num_seeds):
            seed = base_seed + trial
            grammar = make_template(gen_len, seed=seed, vocab_size=vocab_size)
            struct_pos = set(grammar.positions_of(STRUCT))
            detail_pos = set(grammar.positions_of(DETAIL))
            for kind in COMPARED_KINDS:
                backend = TemplateLMBackend(grammar, embed_dim=embed_dim, seed=seed)
                result = decode(
                    backend,
                    prompt=[],
                    cfg=replace(cfg, sampler_kind=kind),
                    gen_len=gen_len,
                    block_size=block_size,
                    steps_per_block=block_size,
                    seed=seed,
                )
                steps = commit_steps(result.trace)
                stats = per_kind[kind]
                stats["valid"].append(grammar.is_valid(result.generated))
                stats["struct"].append(np.mean([steps[p] for p in struct_pos]))
                stats["detail"].append(np.mean([steps[p] for p in detail_pos]))
        for kind in COMPARED_KINDS:
            stats = per_kind[kind]
            rows.append(
                CompareRow(
                    block_size=block_size,
                    sampler=kind,
                    validity_rate=float(np.mean(stats["valid"])),
                    struct_mean_step=float(np.mean(stats["struct"])),
                    detail_mean_step=float(np.mean(stats["detail"])),
                )
            )
    return CompareReport(rows=tuple(rows), num_seeds=num_seeds, gen_len=gen_len)


def format_report(report: CompareReport) -> str:
    lines = [
        f"sampler comparison over {report.num_seeds} seeded templates, "
        f"gen_len={report.gen_len}",
        "",
        f"{'block':>5}  {'sampler':<13} {'validity':>8}  {'struct_mean':>11}  "
        f"{'detail_mean':>11}  {'gap':>8}",
    ]
    for r in report.rows:
        lines.append(
            f"{r.block_size:>5}  {r.sampler.value:<13} {r.validity_rate:>8.3f}  "
            f"{r.struct_mean_step:>11.3f}  {r.detail_mean_step:>11.3f}  "
            f"{r.order_gap:>8.3f}"
        )
    block_sizes = sorted({r.block_size for r in report.rows})
    for b in block_sizes:
        lines.append("")
        lines.append(f"pairwise ordering-gap deltas (block={b}):")
        for (a, c), delta in sorted(report.gap_deltas(b).items()):
            lines.append(f"  {a} - {c}: {delta:+.3f}")
    return "\n".join(lines) + "\n"

"""Spectral-semantic analysis and decode-trace export.

Covers the per-token low-frequency energy ratio, the low/high grouping
rule (low iff the clamped ratio exceeds 0.5), aggregation of groups over
externally supplied category labels, and lossless trace exporters
(CSV, JSON, and a self-contained SVG heatmap with commit-step stars).
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import asdict, dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import ValidationError
from .spectral import HiddenBlock, filter_block, low_half_mask, token_energy

LOW_GROUP_THRESHOLD = 0.5


@dataclass(frozen=True)
class TraceRecord:
    """One (step, position) cell of a decode trajectory."""

    step: int
    position: int
    ell: float
    conf: float
    beta: float
    fused: float
    selected: bool
    committed_token: int | None = None


@dataclass(frozen=True)
class SpectralRatios:
    """Per-token share of energy in the low-frequency half of the spectrum.

    ``values`` is clamped to [0, 1] for reporting; ``raw`` keeps the
    unclamped ratio (band filtering mixes positions, so isolated tokens
    can exceed 1). ``zero_energy[t]`` flags tokens whose total energy is
    zero; their ratio is defined as 0. ``block_ratio`` is the aggregate
    low-energy share of the whole block.
    """

    values: np.ndarray
    raw: np.ndarray
    zero_energy: np.ndarray
    block_ratio: float


@dataclass(frozen=True)
class TokenSpectralProfile:
    position: int
    token: int
    r_low: float
    group: str  # "low" | "high"


@dataclass(frozen=True)
class CategoryStats:
    low_fraction: float
    high_fraction: float
    count: int


def spectral_ratios(h: HiddenBlock) -> SpectralRatios:
    """Low-frequency energy ratio of every token in the block."""
    total = token_energy(h)
    low = token_energy(filter_block(h, low_half_mask(h.num_bins)))
    zero = total == 0.0
    raw = np.divide(low, total, out=np.zeros_like(low), where=~zero)
    total_sum = float(total.sum())
    block_ratio = float(low.sum() / total_sum) if total_sum > 0.0 else 0.0
    return SpectralRatios(
        values=np.clip(raw, 0.0, 1.0),
        raw=raw,
        zero_energy=zero,
        block_ratio=block_ratio,
    )


def low_freq_ratio(h: HiddenBlock) -> np.ndarray:
    """Clamped per-token low-frequency ratio, in [0, 1]."""
    return spectral_ratios(h).values


def classify(r_low: float) -> str:
    return "low" if r_low > LOW_GROUP_THRESHOLD else "high"


def build_profiles(
    h: HiddenBlock, tokens: Sequence[int] | np.ndarray
) -> list[TokenSpectralProfile]:
    """Per-token spectral profiles for a block and its token ids."""
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.shape != (h.block_len,):
        raise ValidationError(
            f"expected {h.block_len} token ids, got shape {tokens.shape}"
        )
    values = spectral_ratios(h).values
    return [
        TokenSpectralProfile(
            position=t, token=int(tokens[t]), r_low=float(values[t]), group=classify(values[t])
        )
        for t in range(h.block_len)
    ]


def top_k_profiles(
    profiles: Sequence[TokenSpectralProfile], k: int, which: str = "low"
) -> list[TokenSpectralProfile]:
    """Top-k profiles by low- (or high-) frequency ratio, position-stable."""
    if k < 1:
        raise ValidationError(f"k must be >= 1, got {k}")
    if which not in ("low", "high"):
        raise ValidationError(f"which must be 'low' or 'high', got {which!r}")
    sign = -1.0 if which == "low" else 1.0
    ranked = sorted(profiles, key=lambda p: (sign * p.r_low, p.position))
    return ranked[:k]


def group_stats(
    profiles: Sequence[TokenSpectralProfile], categories: Mapping[int, str]
) -> dict[str, CategoryStats]:
    """Low/high group fractions per externally supplied category.

    Every profiled position must be labelled; categories that label no
    profiled position do not appear in the output.
    """
    buckets: dict[str, list[TokenSpectralProfile]] = {}
    for p in profiles:
        if p.position not in categories:
            raise ValidationError(f"no category label for position {p.position}")
        buckets.setdefault(categories[p.position], []).append(p)
    out = {}
    for label in sorted(buckets):
        members = buckets[label]
        low = sum(1 for p in members if p.group == "low")
        out[label] = CategoryStats(
            low_fraction=low / len(members),
            high_fraction=(len(members) - low) / len(members),
            count=len(members),
        )
    return out


def read_labels(path) -> dict[int, str]:
    """Parse a ``position<TAB>label`` file (one pair per line, UTF-8)."""
    labels: dict[int, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise ValidationError(
                    f"{path}:{lineno}: expected 'position<TAB>label', got {line!r}"
                )
            try:
                pos = int(parts[0])
            except ValueError:
                raise ValidationError(
                    f"{path}:{lineno}: position {parts[0]!r} is not an integer"
                ) from None
            labels[pos] = parts[1]
    return labels


# --- trace export -----------------------------------------------------------

TRACE_FORMATS = ("csv", "json", "svg")

_CSV_HEADER = "step,position,ell,conf,beta,fused,selected,token"


def export_trace(trace: Sequence[TraceRecord], fmt: str) -> bytes:
    """Serialize a trace to one of ``csv``, ``json``, or ``svg``."""
    if not trace:
        raise ValidationError("cannot export an empty trace")
    if fmt == "csv":
        return _export_csv(trace)
    if fmt == "json":
        return _export_json(trace)
    if fmt == "svg":
        return _export_svg(trace)
    raise ValidationError(f"unknown trace format {fmt!r}; expected one of {TRACE_FORMATS}")


def _export_csv(trace: Sequence[TraceRecord]) -> bytes:
    buf = io.StringIO()
    buf.write(_CSV_HEADER + "\n")
    for r in trace:
        token = "" if r.committed_token is None else str(r.committed_token)
        buf.write(
            f"{r.step},{r.position},{r.ell!r},{r.conf!r},{r.beta!r},{r.fused!r},"
            f"{'true' if r.selected else 'false'},{token}\n"
        )
    return buf.getvalue().encode("utf-8")


def parse_trace_csv(data: bytes) -> list[TraceRecord]:
    """Inverse of the CSV exporter (used for round-trip checks)."""
    lines = data.decode("utf-8").splitlines()
    if not lines or lines[0] != _CSV_HEADER:
        raise ValidationError("not a trace CSV: missing or bad header")
    records = []
    for line in lines[1:]:
        step, position, ell, conf, beta, fused, selected, token = line.split(",")
        records.append(
            TraceRecord(
                step=int(step),
                position=int(position),
                ell=float(ell),
                conf=float(conf),
                beta=float(beta),
                fused=float(fused),
                selected=selected == "true",
                committed_token=int(token) if token else None,
            )
        )
    return records


def _export_json(trace: Sequence[TraceRecord]) -> bytes:
    return json.dumps([asdict(r) for r in trace], indent=None).encode("utf-8")


def parse_trace_json(data: bytes) -> list[TraceRecord]:
    return [TraceRecord(**obj) for obj in json.loads(data.decode("utf-8"))]


_SVG_CELL = 12
_SVG_PAD = 2


def _ramp(v: float) -> str:
    """Linear white -> dark blue ramp over [0, 1]."""
    v = min(1.0, max(0.0, v))
    hi = (255, 255, 255)
    lo = (8, 48, 107)
    r, g, b = (round(h + (l - h) * v) for h, l in zip(hi, lo))
    return f"rgb({r},{g},{b})"


def _star_path(cx: float, cy: float, r: float) -> str:
    """Five-point star polygon centred at (cx, cy)."""
    pts = []
    for i in range(10):
        radius = r if i % 2 == 0 else 0.4 * r
        angle = math.pi / 2 + i * math.pi / 5
        pts.append(f"{cx + radius * math.cos(angle):.2f},{cy - radius * math.sin(angle):.2f}")
    return " ".join(pts)


def _export_svg(trace: Sequence[TraceRecord]) -> bytes:
    steps = sorted({r.step for r in trace})
    positions = sorted({r.position for r in trace})
    srow = {s: i for i, s in enumerate(steps)}
    pcol = {p: i for i, p in enumerate(positions)}
    width = _SVG_PAD * 2 + len(positions) * _SVG_CELL
    height = _SVG_PAD * 2 + len(steps) * _SVG_CELL
    out = io.StringIO()
    out.write(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">\n'
    )
    stars = []
    for r in trace:
        x = _SVG_PAD + pcol[r.position] * _SVG_CELL
        y = _SVG_PAD + srow[r.step] * _SVG_CELL
        out.write(
            f'<rect class="cell" x="{x}" y="{y}" width="{_SVG_CELL}" height="{_SVG_CELL}" '
            f'fill="{_ramp(r.ell)}"/>\n'
        )
        if r.selected:
            stars.append(
                f'<polygon class="star" points="'
                f'{_star_path(x + _SVG_CELL / 2, y + _SVG_CELL / 2, _SVG_CELL * 0.42)}" '
                f'fill="#d62728"/>\n'
            )
    for s in stars:
        out.write(s)
    out.write("</svg>\n")
    return out.getvalue().encode("utf-8")

"""Spectral kernel: real FFTs along the sequence axis, binary frequency
masks, band-pass filtering of hidden-state blocks, and per-token energy.

Conventions, fixed so that dumps and oracle tests are reproducible:

* Forward transform is unnormalized, the inverse carries the ``1/B``
  factor (numpy's default "backward" convention).
* A length-``B`` real signal has ``W = B//2 + 1`` frequency bins; bin 0
  is DC and, for even ``B``, bin ``W-1`` is the Nyquist bin.
* Masks are hard binary vectors over the ``W`` bins; filtering applies
  the same mask to every channel.

All operations are pure; values are immutable after construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError


def num_bins(block_len: int) -> int:
    """Number of independent real-FFT bins of a length-``block_len`` signal."""
    return block_len // 2 + 1


@dataclass(frozen=True)
class HiddenBlock:
    """A ``B x D`` block of real hidden states (positions x channels)."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise ValidationError(f"hidden block must be 2-D (B, D), got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValidationError(f"hidden block needs B >= 1 and D >= 1, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValidationError("hidden block contains non-finite entries")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "data", arr)

    @property
    def block_len(self) -> int:
        return self.data.shape[0]

    @property
    def dim(self) -> int:
        return self.data.shape[1]

    @property
    def num_bins(self) -> int:
        return num_bins(self.block_len)


@dataclass(frozen=True)
class SpectrumBlock:
    """Per-channel real-FFT coefficients of a :class:`HiddenBlock`.

    ``coeffs`` is ``W x D`` complex with ``W = source_len//2 + 1``; the
    source length must be carried explicitly because even and odd ``B``
    map to the same ``W``.
    """

    coeffs: np.ndarray
    source_len: int

    def __post_init__(self):
        arr = np.asarray(self.coeffs, dtype=np.complex128)
        if arr.ndim != 2:
            raise ValidationError(f"spectrum must be 2-D (W, D), got shape {arr.shape}")
        if self.source_len < 1:
            raise ValidationError(f"source_len must be >= 1, got {self.source_len}")
        if arr.shape[0] != num_bins(self.source_len):
            raise ValidationError(
                f"inconsistent spectrum: {arr.shape[0]} bins for source_len "
                f"{self.source_len} (expected {num_bins(self.source_len)})"
            )
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "coeffs", arr)

    @property
    def num_bins(self) -> int:
        return self.coeffs.shape[0]

    @property
    def dim(self) -> int:
        return self.coeffs.shape[1]


@dataclass(frozen=True)
class FrequencyMask:
    """Binary keep/drop vector over the ``W`` real-FFT bins."""

    bits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bits)
        if arr.ndim != 1 or arr.shape[0] < 1:
            raise ValidationError(f"mask must be a non-empty 1-D vector, got shape {arr.shape}")
        if not np.all((arr == 0) | (arr == 1)):
            raise ValidationError("mask entries must be exactly 0 or 1")
        arr = np.ascontiguousarray(arr.astype(np.uint8))
        arr.flags.writeable = False
        object.__setattr__(self, "bits", arr)

    @property
    def num_bins(self) -> int:
        return self.bits.shape[0]

    def complement(self) -> "FrequencyMask":
        return FrequencyMask(1 - self.bits)


@dataclass(frozen=True)
class FrequencyWindow:
    """A contiguous band of ``width`` bins starting at ``offset``.

    ``ratio`` is the relative bandwidth the width was derived from; the
    ``width == max(1, floor(ratio * W))`` relation is enforced wherever a
    window meets a concrete bin count (see :func:`window_mask`).
    """

    ratio: float
    width: int
    offset: int

    def __post_init__(self):
        if not 0.0 < self.ratio <= 1.0:
            raise ValidationError(f"window ratio must be in (0, 1], got {self.ratio}")
        if self.width < 1:
            raise ValidationError(f"window width must be >= 1, got {self.width}")
        if self.offset < 0:
            raise ValidationError(f"window offset must be >= 0, got {self.offset}")


def rfft_seq(h: HiddenBlock) -> SpectrumBlock:
    """Forward real FFT of each channel along the sequence axis.

    ``coeffs[k, d] = sum_t data[t, d] * exp(-2j*pi*k*t/B)`` for
    ``k in [0, B//2]``; unnormalized.
    """
    return SpectrumBlock(np.fft.rfft(h.data, axis=0), source_len=h.block_len)


def irfft_seq(s: SpectrumBlock) -> HiddenBlock:
    """Inverse of :func:`rfft_seq`; carries the ``1/B`` normalization."""
    return HiddenBlock(np.fft.irfft(s.coeffs, n=s.source_len, axis=0))


def low_half_mask(bins: int) -> FrequencyMask:
    """Mask keeping the lowest-frequency half: bins ``k < bins // 2``.

    For ``bins == 1`` the mask is all-zero.
    """
    if bins < 1:
        raise ValidationError(f"need at least one bin, got {bins}")
    bits = np.zeros(bins, dtype=np.uint8)
    bits[: bins // 2] = 1
    return FrequencyMask(bits)


def window_mask(win: FrequencyWindow, bins: int) -> FrequencyMask:
    """Mask keeping exactly ``win.width`` contiguous bins from ``win.offset``."""
    if bins < 1:
        raise ValidationError(f"need at least one bin, got {bins}")
    if win.width != max(1, int(win.ratio * bins)):
        raise ValidationError(
            f"window width {win.width} inconsistent with ratio {win.ratio} over {bins} bins"
        )
    if win.offset + win.width > bins:
        raise ValidationError(
            f"window [{win.offset}, {win.offset + win.width}) exceeds {bins} bins"
        )
    bits = np.zeros(bins, dtype=np.uint8)
    bits[win.offset : win.offset + win.width] = 1
    return FrequencyMask(bits)


def filter_block(h: HiddenBlock, m: FrequencyMask) -> HiddenBlock:
    """Keep only the masked frequency components of every channel.

    Transforms to the frequency domain, zeroes the dropped bins, and
    transforms back; an all-ones mask is the identity up to round-off.
    """
    if m.num_bins != h.num_bins:
        raise ValidationError(
            f"mask has {m.num_bins} bins but block of length {h.block_len} "
            f"has {h.num_bins}"
        )
    spec = np.fft.rfft(h.data, axis=0)
    spec *= m.bits[:, None]
    return HiddenBlock(np.fft.irfft(spec, n=h.block_len, axis=0))


def token_energy(h: HiddenBlock) -> np.ndarray:
    """Per-position energy ``out[t] = sum_d data[t, d]**2`` (length ``B``)."""
    return (h.data * h.data).sum(axis=1)

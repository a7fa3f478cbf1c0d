"""Frequency-domain unmasking scheduler for block-wise masked-diffusion
decoding, with spectral analysis, trace export, and offline replay."""

from .analysis import (
    SpectralRatios,
    TokenSpectralProfile,
    TraceRecord,
    build_profiles,
    export_trace,
    group_stats,
    low_freq_ratio,
    spectral_ratios,
    top_k_profiles,
)
from .backends import (
    ReplayBackend,
    SinusoidBackend,
    Slot,
    TemplateGrammar,
    TemplateLMBackend,
    Tone,
    make_template,
    two_token_sinusoid,
)
from .decoder import (
    MASK_ID,
    DecodeResult,
    ModelOutput,
    StepContext,
    decode,
    split_blocks,
    unmask_budget,
)
from .dumpio import DumpFile, DumpRecorder, StepDump, read_dump, write_dump
from .errors import (
    BadMagicError,
    ChecksumError,
    DumpError,
    ReplayError,
    SizeError,
    ValidationError,
    VersionError,
)
from .sampler import (
    CalibratorHistory,
    SamplerConfig,
    SamplerKind,
    StepScores,
    adaptive_beta,
    fuse_scores,
    masked_max_probs,
    select_positions,
    translated_filtering_score,
    window_at_step,
)
from .spectral import (
    FrequencyMask,
    FrequencyWindow,
    HiddenBlock,
    SpectrumBlock,
    filter_block,
    irfft_seq,
    low_half_mask,
    num_bins,
    rfft_seq,
    token_energy,
    window_mask,
)

__version__ = "0.1.0"

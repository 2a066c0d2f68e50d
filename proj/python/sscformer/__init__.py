"""Streaming chunk / sampled-chunk Conformer encoder (C++ core)."""

from ._core import (
    ChunkLayout,
    ConfigError,
    DimensionError,
    Encoder,
    EncoderConfig,
    EncoderStream,
    StateError,
    attention_mask,
    c2_depthwise,
    make_layout,
    mhsa,
    predict_macs,
    probe_causality,
    sampling_plan,
)

__all__ = [
    "ChunkLayout",
    "ConfigError",
    "DimensionError",
    "Encoder",
    "EncoderConfig",
    "EncoderStream",
    "StateError",
    "attention_mask",
    "c2_depthwise",
    "make_layout",
    "mhsa",
    "predict_macs",
    "probe_causality",
    "sampling_plan",
]

"""Ring-marker detection pipeline: codec, synthesis, image kernels, storage."""

from ._core import (
    clahe,
    confidence,
    decode_bits,
    dequantize_prob,
    downsample4,
    encode_id,
    gaussian_blur,
    generate_frame,
    generate_patch,
    make_target,
    match_detections,
    max_filter,
    morph_close,
    morph_open,
    quantize_prob,
    rasterize_tag,
    read_shard,
    score_decoding,
    shard_path,
    wrap_angle,
    write_shard,
)

__all__ = [
    "clahe",
    "confidence",
    "decode_bits",
    "dequantize_prob",
    "downsample4",
    "encode_id",
    "gaussian_blur",
    "generate_frame",
    "generate_patch",
    "make_target",
    "match_detections",
    "max_filter",
    "morph_close",
    "morph_open",
    "quantize_prob",
    "rasterize_tag",
    "read_shard",
    "score_decoding",
    "shard_path",
    "wrap_angle",
    "write_shard",
]

from .image import Image, quantize, round_half_away
from .jpeg import (
    BASE_CHROMA_Q,
    BASE_LUMA_Q,
    JpegDecodeError,
    jpeg_decode,
    jpeg_encode,
    jpeg_roundtrip,
    quality_scale,
    scaled_table,
)
from .pipeline import (
    STAGES,
    DegradationSpec,
    GaussianBlur,
    GaussianNoise,
    JpegStage,
    RandomRealSR,
    Stage,
    degrade,
    register_stage,
    stage_from_dict,
)
from .resize import bicubic_resize, cubic, resize_array, resize_weights

__all__ = [
    "Image", "quantize", "round_half_away",
    "BASE_CHROMA_Q", "BASE_LUMA_Q", "JpegDecodeError", "jpeg_decode", "jpeg_encode",
    "jpeg_roundtrip", "quality_scale", "scaled_table",
    "STAGES", "DegradationSpec", "GaussianBlur", "GaussianNoise", "JpegStage", "RandomRealSR", "Stage",
    "degrade", "register_stage", "stage_from_dict",
    "bicubic_resize", "cubic", "resize_array", "resize_weights",
]

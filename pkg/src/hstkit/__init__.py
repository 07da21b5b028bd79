"""Multi-branch windowed-attention network for x4 super-resolution of JPEG-compressed images."""

__version__ = "0.1.0"

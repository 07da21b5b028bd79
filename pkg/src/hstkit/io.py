"""PNG reading/writing and directory indexing."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError

from .degradation import Image

IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg", ".bmp", ".tif", ".tiff")


class UnsupportedImageError(ValueError):
    pass


PNG_SIGNATURE = b"\x89PNG\r\n\x1a\n"


def png_bit_depth(path) -> int | None:
    """Bit depth from the IHDR chunk, or None if ``path`` is not a PNG."""
    with open(path, "rb") as f:
        head = f.read(26)
    if head[:8] != PNG_SIGNATURE or head[12:16] != b"IHDR" or len(head) < 25:
        return None
    return head[24]


def load_png(path) -> Image:
    """Read an 8-bit grayscale or RGB image (palette images are expanded to RGB)."""
    depth = png_bit_depth(path)
    if depth is not None and depth > 8:
        raise UnsupportedImageError(f"{path}: {depth}-bit PNG is unsupported; only 8-bit samples are accepted")
    try:
        with PILImage.open(path) as im:
            mode = im.mode
            if mode in ("I;16", "I;16B", "I;16L", "I", "F"):
                raise UnsupportedImageError(f"{path}: {mode} samples are not 8-bit; only 8-bit images are supported")
            if mode == "P":
                im = im.convert("RGB")
            elif mode == "1":
                im = im.convert("L")
            elif mode not in ("L", "RGB"):
                raise UnsupportedImageError(f"{path}: unsupported mode {mode}; need 8-bit L or RGB")
            arr = np.asarray(im, dtype=np.uint8).copy()
    except UnidentifiedImageError as e:
        raise UnsupportedImageError(f"{path}: not a readable image ({e})") from None
    return Image(arr)


def save_png(img: Image, path) -> None:
    px = img.pixels[..., 0] if img.channels == 1 else img.pixels
    d = os.path.dirname(os.fspath(path))
    if d:
        os.makedirs(d, exist_ok=True)
    PILImage.fromarray(px, mode="L" if img.channels == 1 else "RGB").save(path, format="PNG")


@dataclass(frozen=True)
class IndexEntry:
    path: str  # relative to the root, '/'-separated
    width: int
    height: int


class DatasetIndex:
    """Images under ``root`` in byte-lexicographic order of their relative paths."""

    def __init__(self, root, entries: list[IndexEntry]):
        self.root = os.fspath(root)
        self.entries = entries

    @classmethod
    def scan(cls, root, suffixes=IMAGE_SUFFIXES) -> "DatasetIndex":
        root = os.fspath(root)
        if not os.path.isdir(root):
            raise FileNotFoundError(f"dataset root {root} is not a directory")
        rels = []
        for dirpath, _, files in os.walk(root):
            for f in files:
                if f.lower().endswith(suffixes):
                    rel = os.path.relpath(os.path.join(dirpath, f), root).replace(os.sep, "/")
                    rels.append(rel)
        rels.sort(key=lambda r: r.encode("utf-8"))
        entries = []
        for rel in rels:
            try:
                with PILImage.open(os.path.join(root, rel)) as im:
                    w, h = im.size
            except (UnidentifiedImageError, OSError) as e:
                raise UnsupportedImageError(f"{rel}: not decodable ({e})") from None
            entries.append(IndexEntry(rel, w, h))
        return cls(root, entries)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def full_path(self, entry: IndexEntry) -> str:
        return os.path.join(self.root, *entry.path.split("/"))

    def load(self) -> list[tuple[str, Image]]:
        return [(e.path, load_png(self.full_path(e))) for e in self.entries]

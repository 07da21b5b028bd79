from __future__ import annotations

import json
import os
import subprocess
import sys

import numpy as np
import pytest
import skimage.data as skd
from PIL import Image as PILImage

from hstkit.cli import EXIT_FAIL, EXIT_OK, EXIT_USAGE, main
from hstkit.degradation import DegradationSpec, Image, degrade
from hstkit.experiment import ConfigFileError, load_config, parse_config, parse_extra_stages
from hstkit.io import DatasetIndex, UnsupportedImageError, load_png, save_png
from hstkit.model import Checkpoint, SRModel, load_checkpoint, preset, reduced, save_checkpoint
from hstkit.degradation import GaussianBlur, GaussianNoise

TINY = reduced(channels=4, heads=2, window=4, branches=2, rstb=1, stl=1)


def write_hr_tree(root, n=3, size=64):
    src = skd.astronaut()
    paths = []
    for i in range(n):
        sub = root / ("b" if i % 2 else "a")
        sub.mkdir(parents=True, exist_ok=True)
        p = sub / f"img{i}.png"
        save_png(Image(src[50 * i:50 * i + size, 40 * i:40 * i + size].copy()), p)
        paths.append(p)
    return paths


def tiny_ckpt(path):
    m = SRModel.create(TINY, seed=0)
    save_checkpoint(path, Checkpoint(TINY, m.params))
    return path


# ---------------------------------------------------------------- io


@pytest.mark.parametrize("shape", [(9, 7, 3), (5, 6, 1), (1, 1, 3), (1, 1, 1)])
def test_png_round_trip(tmp_path, shape):
    img = Image(np.random.default_rng(0).integers(0, 256, shape, dtype=np.uint8))
    save_png(img, tmp_path / "x.png")
    assert load_png(tmp_path / "x.png") == img


def test_png_16bit_rejected(tmp_path):
    PILImage.fromarray(np.full((4, 4), 40000, np.uint16)).save(tmp_path / "d.png")
    with pytest.raises(UnsupportedImageError, match="16-bit"):
        load_png(tmp_path / "d.png")


def test_png_16bit_rgb_rejected(tmp_path):
    # hand-built 16-bit RGB PNG; some readers silently narrow these
    import struct
    import zlib
    raw = b"".join(b"\x00" + b"\x12\x34" * 3 * 2 for _ in range(2))
    chunk = lambda t, d: struct.pack(">I", len(d)) + t + d + struct.pack(">I", zlib.crc32(t + d))
    png = (b"\x89PNG\r\n\x1a\n" + chunk(b"IHDR", struct.pack(">IIBBBBB", 2, 2, 16, 2, 0, 0, 0))
           + chunk(b"IDAT", zlib.compress(raw)) + chunk(b"IEND", b""))
    (tmp_path / "rgb16.png").write_bytes(png)
    with pytest.raises(UnsupportedImageError):
        load_png(tmp_path / "rgb16.png")


def test_palette_expanded(tmp_path):
    PILImage.fromarray(np.zeros((3, 3, 3), np.uint8)).convert("P").save(tmp_path / "p.png")
    assert load_png(tmp_path / "p.png").channels == 3


def test_not_an_image(tmp_path):
    (tmp_path / "x.png").write_bytes(b"hello")
    with pytest.raises(UnsupportedImageError):
        load_png(tmp_path / "x.png")


def test_dataset_index_order(tmp_path):
    for rel in ["b/z.png", "a/y.png", "B.png", "a.png", "a/Z.png"]:
        p = tmp_path / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        save_png(Image(np.zeros((2, 3, 3), np.uint8)), p)
    (tmp_path / "notes.txt").write_text("skip")
    idx = DatasetIndex.scan(tmp_path)
    assert [e.path for e in idx] == ["B.png", "a.png", "a/Z.png", "a/y.png", "b/z.png"]
    assert all((e.width, e.height) == (3, 2) for e in idx)
    assert len(idx.load()) == 5


def test_dataset_index_missing_root(tmp_path):
    with pytest.raises(FileNotFoundError):
        DatasetIndex.scan(tmp_path / "nope")


# ---------------------------------------------------------------- experiment config


CONFIG = """
[experiment]
seed = 3
output_dir = out
precision = float64

[model]
branches = 2
channels_per_branch = 4, 4
rstb_per_branch = 1, 1
stl_per_rstb = 1
heads = 2
window = 4

[data]
train = train
val = train

[stage:pre]
jpeg_quality = none
total_iters = 2
batch_size = 1
patch_size = 8
lr_milestones = 1
log_every = 1

[stage:q40]
jpeg_quality = 40
init_from = pre
loss = charbonnier
total_iters = 1
batch_size = 1
patch_size = 8
extra_stages = blur sigma=1.0 | noise sigma=2
"""


def test_parse_config(tmp_path):
    (tmp_path / "train").mkdir()
    cfg = parse_config(CONFIG, str(tmp_path))
    assert cfg.seed == 3 and cfg.precision == "float64"
    assert cfg.model.channels_per_branch == (4, 4)
    assert [s.name for s in cfg.stages] == ["pre", "q40"]
    assert cfg.stages[0].degradation.jpeg_quality is None and cfg.stages[0].lr_milestones == (1,)
    q40 = cfg.stages[1]
    assert q40.init_from == "pre" and q40.loss.kind == "charbonnier"
    assert q40.degradation.extra_stages == (GaussianBlur(1.0), GaussianNoise(2))
    assert cfg.output_dir == os.path.join(str(tmp_path), "out")


def test_config_preset(tmp_path):
    (tmp_path / "t").mkdir()
    cfg = parse_config("[model]\npreset = HST-2\n[data]\ntrain = t\n[stage:a]\n", str(tmp_path))
    assert cfg.model == preset("HST-2")


@pytest.mark.parametrize("text,match", [
    ("[data]\ntrain = t\n[stage:a]\n", "model"),
    ("[model]\npreset = HST-1\n[data]\ntrain = missing\n[stage:a]\n", "does not exist"),
    ("[model]\npreset = HST-1\n[data]\ntrain = t\n", "stage"),
    ("[model]\npreset = HST-1\n[data]\ntrain = t\n[stage:a]\nbogus = 1\n", "unknown"),
    ("[model]\npreset = HST-1\nheads = 3\n[data]\ntrain = t\n[stage:a]\n", "preset"),
    ("[model]\npreset = HST-1\n[data]\ntrain = t\n[experiment]\nprecision = half\n[stage:a]\n", "precision"),
])
def test_config_errors(tmp_path, text, match):
    (tmp_path / "t").mkdir()
    with pytest.raises(ConfigFileError, match=match):
        parse_config(text, str(tmp_path))


def test_extra_stage_parse_error():
    with pytest.raises(ConfigFileError):
        parse_extra_stages("blur sigma=)")


# ---------------------------------------------------------------- CLI


def test_params_all(capsys):
    assert main(["params"]) == EXIT_OK
    out = capsys.readouterr().out
    assert out.count("ok") == 3 and "HST-3" in out


def test_params_hst3_value(capsys):
    assert main(["params", "--preset", "HST-3"]) == EXIT_OK
    line = capsys.readouterr().out.strip()
    n = int(line.split("\t")[1])
    assert abs(n / 16.58e6 - 1) <= 0.05


def test_params_unknown_preset_is_usage_error():
    assert main(["params", "--preset", "HST-7"]) == EXIT_USAGE


def test_bad_arguments_are_usage_errors():
    assert main([]) == EXIT_USAGE
    assert main(["degrade", "x"]) == EXIT_USAGE  # --out missing
    assert main(["degrade", "x", "--out", "y", "--quality", "0"]) == EXIT_USAGE


def test_gradcheck_op(capsys):
    assert main(["gradcheck", "--scope", "op"]) == EXIT_OK
    assert capsys.readouterr().out.strip().endswith("PASS")


def test_gradcheck_model_sampled(capsys):
    assert main(["gradcheck", "--scope", "model", "--max-entries", "2"]) == EXIT_OK
    assert "PASS" in capsys.readouterr().out


def test_degrade_tree_and_manifest(tmp_path):
    write_hr_tree(tmp_path / "hr", n=3, size=256)
    out = tmp_path / "lr"
    assert main(["degrade", str(tmp_path / "hr"), "--out", str(out), "--quality", "10"]) == EXIT_OK
    man = json.loads((out / "manifest.json").read_text())
    assert [f["source"] for f in man["files"]] == ["a/img0.png", "a/img2.png", "b/img1.png"]
    assert man["spec_hash"] == DegradationSpec(jpeg_quality=10).digest()
    lr = load_png(out / "a" / "img0.png")
    assert lr.shape == (64, 64, 3)
    assert lr == degrade(load_png(tmp_path / "hr" / "a" / "img0.png"), DegradationSpec(jpeg_quality=10))
    assert json.loads((out / "provenance.json").read_text())["version"].startswith("hstkit")

    out2 = tmp_path / "lr2"
    assert main(["degrade", str(tmp_path / "hr"), "--out", str(out2), "--quality", "10"]) == EXIT_OK
    man2 = json.loads((out2 / "manifest.json").read_text())
    assert man2["files"] == man["files"] and man2["spec_hash"] == man["spec_hash"]


def test_degrade_empty_dir(tmp_path):
    (tmp_path / "e").mkdir()
    assert main(["degrade", str(tmp_path / "e"), "--out", str(tmp_path / "o")]) == EXIT_OK
    assert json.loads((tmp_path / "o" / "manifest.json").read_text())["files"] == []


def test_degrade_bad_file_continues(tmp_path):
    write_hr_tree(tmp_path / "hr", n=1)
    (tmp_path / "hr" / "broken.png").write_bytes(b"junk")
    out = tmp_path / "o"
    assert main(["degrade", str(tmp_path / "hr"), "--out", str(out)]) == EXIT_FAIL
    files = {f["source"]: f for f in json.loads((out / "manifest.json").read_text())["files"]}
    assert "error" in files["broken.png"] and files["a/img0.png"]["lr_shape"] == [16, 16, 3]


def test_degrade_missing_input(tmp_path):
    assert main(["degrade", str(tmp_path / "nope"), "--out", str(tmp_path / "o")]) == EXIT_USAGE


def test_degrade_parallel_matches_serial(tmp_path, monkeypatch):
    write_hr_tree(tmp_path / "hr", n=3)
    assert main(["degrade", str(tmp_path / "hr"), "--out", str(tmp_path / "s")]) == EXIT_OK
    monkeypatch.setenv("HSTKIT_THREADS", "2")
    assert main(["degrade", str(tmp_path / "hr"), "--out", str(tmp_path / "p")]) == EXIT_OK
    a = json.loads((tmp_path / "s" / "manifest.json").read_text())
    b = json.loads((tmp_path / "p" / "manifest.json").read_text())
    assert a["files"] == b["files"]


def test_bad_thread_env(monkeypatch):
    monkeypatch.setenv("HSTKIT_THREADS", "zero")
    assert main(["params"]) == EXIT_USAGE


def test_infer_64_to_256(tmp_path):
    ck = tiny_ckpt(tmp_path / "m.ckpt")
    save_png(Image(skd.astronaut()[:64, :64].copy()), tmp_path / "in.png")
    assert main(["infer", str(ck), str(tmp_path / "in.png")]) == EXIT_OK
    assert load_png(tmp_path / "in_x4.png").shape == (256, 256, 3)
    assert main(["infer", str(ck), str(tmp_path / "in.png"), "--ensemble", "--out", str(tmp_path / "e.png")]) == EXIT_OK
    assert load_png(tmp_path / "e.png").shape == (256, 256, 3)


def test_infer_missing_checkpoint(tmp_path):
    assert main(["infer", str(tmp_path / "none.ckpt"), str(tmp_path / "x.png")]) == EXIT_USAGE
    (tmp_path / "bad.ckpt").write_bytes(b"xx")
    assert main(["infer", str(tmp_path / "bad.ckpt"), str(tmp_path / "x.png")]) == EXIT_USAGE


def test_eval_report(tmp_path, capsys):
    ck = tiny_ckpt(tmp_path / "m.ckpt")
    write_hr_tree(tmp_path / "hr", n=2, size=32)
    out = tmp_path / "ev"
    assert main(["eval", str(ck), str(tmp_path / "hr"), "--quality", "20", "--out", str(out)]) == EXIT_OK
    rep = json.loads((out / "report.json").read_text())
    assert [r["name"] for r in rep["rows"]] == ["a/img0.png", "b/img1.png"]
    assert "mean\tPSNR" in capsys.readouterr().out


def test_train_from_config(tmp_path):
    write_hr_tree(tmp_path / "train", n=2, size=48)
    (tmp_path / "exp.ini").write_text(CONFIG)
    assert main(["train", "--config", str(tmp_path / "exp.ini")]) == EXIT_OK
    out = tmp_path / "out"
    assert (out / "pre" / "pre_final.ckpt").exists() and (out / "q40" / "q40_final.ckpt").exists()
    assert (out / "config_snapshot.ini").read_text() == CONFIG
    ck = load_checkpoint(out / "q40" / "q40_final.ckpt")
    assert ck.params.dtype == np.float64 and ck.meta["seed"] == 3
    assert load_config(tmp_path / "exp.ini").stages[1].name == "q40"


def test_train_missing_config(tmp_path):
    assert main(["train", "--config", str(tmp_path / "none.ini")]) == EXIT_USAGE


def test_console_entry_point_exit_code():
    r = subprocess.run([sys.executable, "-m", "hstkit", "params", "--preset", "HST-1"],
                       capture_output=True, text=True)
    assert r.returncode == 0 and "HST-1" in r.stdout
    r = subprocess.run([sys.executable, "-m", "hstkit", "params", "--preset", "nope"],
                       capture_output=True, text=True)
    assert r.returncode == 2

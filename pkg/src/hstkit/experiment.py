"""INI experiment files.

Example::

    [experiment]
    seed = 0
    output_dir = runs/demo
    precision = float32

    [model]
    preset = HST-3            ; or explicit fields, e.g.
    ; branches = 3
    ; channels_per_branch = 8, 8, 8

    [data]
    train = data/train_hr
    val = data/val_hr

    [stage:pretrain]
    jpeg_quality = none
    lr_initial = 2e-4
    lr_milestones = 100000, 250000
    total_iters = 400000

    [stage:q40]
    jpeg_quality = 40
    init_from = pretrain

Relative paths resolve against the file's directory. Stages run in file
order; ``init_from`` names an earlier stage or a checkpoint path.
``extra_stages`` takes ``kind key=value ...`` items separated by ``|``.
"""

from __future__ import annotations

import ast
import configparser
import os
from dataclasses import dataclass, field, fields

from .degradation import DegradationSpec, stage_from_dict
from .metrics import LossConfig
from .model import HSTConfig, preset
from .train import TrainStage

PRECISIONS = ("float32", "float64")
_STAGE_KEYS = {"scale", "antialias", "jpeg_quality", "extra_stages", "loss", "epsilon",
               "lr_initial", "lr_milestones", "total_iters", "batch_size", "patch_size",
               "init_from", "augment", "grad_clip", "log_every", "val_every", "ckpt_every"}


class ConfigFileError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    model: HSTConfig
    stages: list
    train: str
    val: str | None = None
    test: str | None = None
    seed: int = 0
    output_dir: str = "runs"
    precision: str = "float32"
    source_text: str = field(default="", repr=False)

    def __post_init__(self):
        names = [s.name for s in self.stages]
        if len(set(names)) != len(names):
            raise ConfigFileError(f"stage names must be unique: {names}")
        if self.precision not in PRECISIONS:
            raise ConfigFileError(f"precision must be one of {PRECISIONS}")
        for label in ("train", "val", "test"):
            p = getattr(self, label)
            if p is not None and not os.path.isdir(p):
                raise ConfigFileError(f"[data] {label} = {p} does not exist")


def _list(v: str, cast=int) -> tuple:
    return tuple(cast(x) for x in v.replace(",", " ").split())


def _opt(v: str):
    return None if v.strip().lower() in ("", "none") else v.strip()


def parse_extra_stages(v: str) -> tuple:
    out = []
    for item in filter(None, (s.strip() for s in v.split("|"))):
        kind, *kvs = item.split()
        d = {"kind": kind}
        for kv in kvs:
            k, _, val = kv.partition("=")
            try:
                d[k] = ast.literal_eval(val)
            except (ValueError, SyntaxError):
                raise ConfigFileError(f"bad extra stage parameter {kv!r}") from None
        out.append(stage_from_dict(d))
    return tuple(out)


def _model(sec) -> HSTConfig:
    if "preset" in sec:
        extra = set(sec) - {"preset"}
        if extra:
            raise ConfigFileError(f"[model] preset cannot be combined with {sorted(extra)}")
        return preset(sec["preset"])
    kw = {}
    types = {f.name: f.type for f in fields(HSTConfig)}
    for k, v in sec.items():
        if k not in types:
            raise ConfigFileError(f"[model] unknown key {k}")
        if k in ("channels_per_branch", "rstb_per_branch"):
            kw[k] = _list(v)
        elif k in ("mlp_ratio", "ln_eps"):
            kw[k] = float(v)
        else:
            kw[k] = int(v)
    return HSTConfig(**kw)


def _stage(name: str, sec, base: str) -> TrainStage:
    unknown = set(sec) - _STAGE_KEYS
    if unknown:
        raise ConfigFileError(f"[stage:{name}] unknown keys {sorted(unknown)}")
    q = _opt(sec.get("jpeg_quality", "none"))
    spec = DegradationSpec(scale=int(sec.get("scale", "4")),
                           antialias=sec.getboolean("antialias", True),
                           jpeg_quality=None if q is None else int(q),
                           extra_stages=parse_extra_stages(sec.get("extra_stages", "")))
    loss = LossConfig(sec.get("loss", "l1"), float(sec.get("epsilon", "1e-9")))
    init = _opt(sec.get("init_from", ""))
    if init is not None and (os.sep in init or init.endswith(".ckpt")):
        init = os.path.normpath(os.path.join(base, init))
    clip = _opt(sec.get("grad_clip", ""))
    return TrainStage(
        name=name, degradation=spec, loss=loss,
        lr_initial=float(sec.get("lr_initial", "2e-4")),
        lr_milestones=_list(sec.get("lr_milestones", "")),
        total_iters=int(sec.get("total_iters", "1000")),
        batch_size=int(sec.get("batch_size", "16")),
        patch_size=int(sec.get("patch_size", "64")),
        init_from=init, augment=sec.getboolean("augment", True),
        grad_clip=None if clip is None else float(clip),
        log_every=int(sec.get("log_every", "10")),
        val_every=int(sec.get("val_every", "0")),
        ckpt_every=int(sec.get("ckpt_every", "0")))


def parse_config(text: str, base_dir: str = ".") -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"), interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as e:
        raise ConfigFileError(str(e)) from None
    for req in ("model", "data"):
        if not cp.has_section(req):
            raise ConfigFileError(f"missing [{req}] section")
    exp = cp["experiment"] if cp.has_section("experiment") else {}
    data = cp["data"]
    if "train" not in data:
        raise ConfigFileError("[data] needs a train directory")
    path = lambda v: None if _opt(v) is None else os.path.normpath(os.path.join(base_dir, v.strip()))
    stages = [_stage(s.split(":", 1)[1].strip(), cp[s], base_dir)
              for s in cp.sections() if s.startswith("stage:")]
    if not stages:
        raise ConfigFileError("no [stage:NAME] sections")
    return ExperimentConfig(
        model=_model(cp["model"]), stages=stages,
        train=path(data["train"]), val=path(data.get("val", "")), test=path(data.get("test", "")),
        seed=int(exp.get("seed", "0")),
        output_dir=path(exp.get("output_dir", "runs")),
        precision=exp.get("precision", "float32"), source_text=text)


def load_config(path) -> ExperimentConfig:
    with open(path) as f:
        text = f.read()
    return parse_config(text, os.path.dirname(os.path.abspath(path)))

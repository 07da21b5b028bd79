"""Training stage records and the pretrain -> finetune chains."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from ..degradation import DegradationSpec, RandomRealSR
from ..metrics import LossConfig


@dataclass(frozen=True)
class TrainStage:
    name: str
    degradation: DegradationSpec = field(default_factory=DegradationSpec)
    loss: LossConfig = field(default_factory=LossConfig)
    lr_initial: float = 2e-4
    lr_milestones: tuple = ()
    total_iters: int = 1000
    batch_size: int = 16
    patch_size: int = 64  # LR side
    init_from: str | None = None
    augment: bool = True
    grad_clip: float | None = None
    log_every: int = 10
    val_every: int = 0  # 0 disables periodic validation
    ckpt_every: int = 0  # 0 writes only the final checkpoint

    def __post_init__(self):
        object.__setattr__(self, "lr_milestones", tuple(int(m) for m in self.lr_milestones))
        ms = self.lr_milestones
        if any(b <= a for a, b in zip(ms, ms[1:])):
            raise ValueError(f"milestones must be strictly increasing: {ms}")
        if ms and ms[-1] >= self.total_iters:
            raise ValueError(f"milestones must be < total_iters={self.total_iters}: {ms}")
        if not self.lr_initial > 0:
            raise ValueError("lr_initial must be positive")
        if self.total_iters < 0 or self.batch_size < 1 or self.patch_size < 1:
            raise ValueError("total_iters >= 0, batch_size >= 1 and patch_size >= 1 required")
        if self.grad_clip is not None and not self.grad_clip > 0:
            raise ValueError("grad_clip must be positive when set")

    def to_dict(self) -> dict:
        return {"name": self.name, "degradation": self.degradation.to_dict(),
                "loss": {"kind": self.loss.kind, "epsilon": self.loss.epsilon},
                "lr_initial": self.lr_initial, "lr_milestones": list(self.lr_milestones),
                "total_iters": self.total_iters, "batch_size": self.batch_size,
                "patch_size": self.patch_size, "init_from": self.init_from,
                "augment": self.augment, "grad_clip": self.grad_clip}


def pretrain_stage(**kw) -> TrainStage:
    """x4 bicubic SR pretraining."""
    base = dict(name="pretrain", degradation=DegradationSpec(jpeg_quality=None),
                lr_initial=2e-4, lr_milestones=(100_000, 250_000), total_iters=400_000)
    base.update(kw)
    return TrainStage(**base)


def realsr_spec() -> DegradationSpec:
    """Randomized blur/noise/JPEG after the bicubic downsample."""
    return DegradationSpec(jpeg_quality=None, extra_stages=(RandomRealSR(),))


def compression_chain(batch_size: int = 16) -> list[TrainStage]:
    """Pretrain, finetune at Q=40, then Q=30/20/10 each finetuned from Q=40."""
    pre = pretrain_stage(batch_size=batch_size)
    q40 = TrainStage(name="q40", degradation=DegradationSpec(jpeg_quality=40),
                     lr_initial=1e-4, lr_milestones=(100_000,), total_iters=200_000,
                     batch_size=batch_size, init_from="pretrain")
    rest = [TrainStage(name=f"q{q}", degradation=DegradationSpec(jpeg_quality=q),
                       lr_initial=8e-5, total_iters=100_000, batch_size=batch_size,
                       init_from="q40") for q in (30, 20, 10)]
    return [pre, q40, *rest]


def scaled(stage: TrainStage, factor: float) -> TrainStage:
    """Shrink iteration counts (and milestones) by ``factor`` for desk runs."""
    total = max(1, int(round(stage.total_iters * factor)))
    ms = tuple(sorted({int(round(m * factor)) for m in stage.lr_milestones} - {0}))
    ms = tuple(m for m in ms if m < total)
    return replace(stage, total_iters=total, lr_milestones=ms)

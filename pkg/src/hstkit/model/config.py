"""Architecture description and named presets."""

from __future__ import annotations

from dataclasses import asdict, dataclass

from ..tensor import ConfigError

BRANCH_NAMES = {1: ("high",), 2: ("mid", "high"), 3: ("low", "mid", "high")}


@dataclass(frozen=True)
class HSTConfig:
    """Branch lists are ordered low -> high resolution.

    ``channels_per_branch[i]`` and ``rstb_per_branch[i]`` describe the i-th
    branch of ``BRANCH_NAMES[branches]``.
    """

    branches: int = 3
    channels_per_branch: tuple = (144, 60, 168)
    rstb_per_branch: tuple = (2, 4, 6)
    stl_per_rstb: int = 6
    window: int = 8
    heads: int = 6
    mlp_ratio: float = 2.0
    scale: int = 4
    in_channels: int = 3
    out_channels: int = 3
    ln_eps: float = 1e-5

    def __post_init__(self):
        object.__setattr__(self, "channels_per_branch", tuple(int(c) for c in self.channels_per_branch))
        object.__setattr__(self, "rstb_per_branch", tuple(int(r) for r in self.rstb_per_branch))
        self.validate()

    def validate(self) -> None:
        if self.branches not in BRANCH_NAMES:
            raise ConfigError(f"branches must be 1..3, got {self.branches}")
        if len(self.channels_per_branch) != self.branches or len(self.rstb_per_branch) != self.branches:
            raise ConfigError("channels_per_branch and rstb_per_branch need one entry per branch")
        if self.window < 1:
            raise ConfigError("window must be >= 1")
        if self.heads < 1 or any(c % self.heads for c in self.channels_per_branch):
            raise ConfigError(f"heads={self.heads} must divide every branch width {self.channels_per_branch}")
        if any(c < 1 for c in self.channels_per_branch) or any(r < 0 for r in self.rstb_per_branch):
            raise ConfigError("branch widths must be positive and block counts non-negative")
        if self.stl_per_rstb < 1 or self.mlp_ratio <= 0:
            raise ConfigError("stl_per_rstb must be >= 1 and mlp_ratio > 0")
        if self.scale != 4:
            raise ConfigError("only x4 reconstruction is supported")
        if self.in_channels != 3 or self.out_channels != 3:
            raise ConfigError("HST maps RGB to RGB")

    @property
    def branch_names(self) -> tuple:
        return BRANCH_NAMES[self.branches]

    def width(self, branch: str) -> int:
        return self.channels_per_branch[self.branch_names.index(branch)]

    def depth(self, branch: str) -> int:
        return self.rstb_per_branch[self.branch_names.index(branch)]

    @property
    def mlp_hidden(self) -> dict:
        return {b: int(self.width(b) * self.mlp_ratio) for b in self.branch_names}

    @property
    def pad_multiple(self) -> int:
        # the coarsest branch must tile into whole windows
        return self.window * 2 ** (self.branches - 1)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["channels_per_branch"] = list(self.channels_per_branch)
        d["rstb_per_branch"] = list(self.rstb_per_branch)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "HSTConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config fields: {sorted(unknown)}")
        return cls(**d)


# Branch widths are fixed per branch across the three presets; high=168
# lands HST-1 on 11.90M, middle=60 and low=144 land HST-2/HST-3.
PRESETS = {
    "HST-1": HSTConfig(branches=1, channels_per_branch=(168,), rstb_per_branch=(6,)),
    "HST-2": HSTConfig(branches=2, channels_per_branch=(60, 168), rstb_per_branch=(4, 6)),
    "HST-3": HSTConfig(branches=3, channels_per_branch=(144, 60, 168), rstb_per_branch=(2, 4, 6)),
}

# reported sizes the presets are tuned against
REFERENCE_PARAMS = {"HST-1": 11.90e6, "HST-2": 12.98e6, "HST-3": 16.58e6}


def preset(name: str) -> HSTConfig:
    try:
        return PRESETS[name.upper()]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def reduced(channels: int = 8, window: int = 4, branches: int = 3, rstb: int = 1,
            stl: int = 2, heads: int = 2, mlp_ratio: float = 2.0) -> HSTConfig:
    """Small configuration for gradient checks and desk-scale training."""
    return HSTConfig(branches=branches, channels_per_branch=(channels,) * branches,
                     rstb_per_branch=(rstb,) * branches, stl_per_rstb=stl, window=window,
                     heads=heads, mlp_ratio=mlp_ratio)



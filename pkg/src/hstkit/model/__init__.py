"""HST network definition."""

from .config import PRESETS, REFERENCE_PARAMS, HSTConfig, preset, reduced
from .network import (
    ParamStore,
    ParamView,
    SRModel,
    build,
    count_for_config,
    count_parameters,
    enhance,
    extract_hierarchical,
    forward,
    fuse_into_branch,
    param_shapes,
    reconstruct_hr,
    stage_plan,
    pad_input,
    crop_output,
    rstb_forward,
    stl_forward,
    stl_shift,
)
from .checkpoint import Checkpoint, CheckpointError, load_checkpoint, save_checkpoint

"""Optimization, staging, sampling and inference."""

from .data import Batch, Pair, dihedral, inverse_dihedral, make_pairs, sample_batch
from .infer import EvalReport, ensemble_array, evaluate, infer, infer_array, self_ensemble_infer
from .loop import NonFiniteLossError, RunSink, StageResult, run_chain, run_stage, validate
from .optim import AdamState, MissingGradientError, adam_step, clip_grad_norm, lr_at
from .stage import TrainStage, compression_chain, pretrain_stage, realsr_spec, scaled

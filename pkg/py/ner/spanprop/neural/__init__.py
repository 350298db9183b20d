from . import autograd
from .autograd import Tensor
from .checkpoint import (
    CHECKPOINT_VERSION,
    Checkpoint,
    CheckpointError,
    load_checkpoint,
    pack_array,
    save_checkpoint,
    unpack_array,
)
from .model import EncodedBatch, ModelDims, SpanProposalModel, SpanRows, encode_batch

__all__ = [
    "CHECKPOINT_VERSION",
    "Checkpoint",
    "CheckpointError",
    "EncodedBatch",
    "ModelDims",
    "SpanProposalModel",
    "SpanRows",
    "Tensor",
    "autograd",
    "encode_batch",
    "load_checkpoint",
    "pack_array",
    "save_checkpoint",
    "unpack_array",
]

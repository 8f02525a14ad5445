"""Structured sparse coding and discriminative dictionary learning."""

from .complexity import complexity_eval
from .core import BlockPartition
from .datagen import LabeledDataset
from .dfdl import dfdl_fit, dfdl_predict
from .dlsi import dlsi_predict, dlsi_train
from .lrsdl import fddl_train, lrsdl_predict, lrsdl_train
from .metrics import evaluate, roc_sweep
from .solvers import ProxKind, lasso_code, omp_batch
from .tensor import SparsityMode, generalized_src, shiftsrc_classify, tensor_code, tensordl_train

__version__ = "0.1.0"

__all__ = [
    "BlockPartition",
    "LabeledDataset",
    "ProxKind",
    "SparsityMode",
    "complexity_eval",
    "dfdl_fit",
    "dfdl_predict",
    "dlsi_predict",
    "dlsi_train",
    "evaluate",
    "fddl_train",
    "generalized_src",
    "lasso_code",
    "lrsdl_predict",
    "lrsdl_train",
    "omp_batch",
    "roc_sweep",
    "shiftsrc_classify",
    "tensor_code",
    "tensordl_train",
]

"""liarnet: six-class fake-news classification on the LIAR benchmark.

A self-contained stack: a float64 reverse-mode autodiff engine, the layer
vocabulary (embedding, dense, 1-D convolution, global max pooling,
bidirectional LSTM), Adadelta training, three model architectures wired over
per-attribute branches and pairwise relation merges, and a metrics/report
module with a built-in verification suite.
"""

__version__ = "0.1.0"

from .tensor import Tensor, no_grad, finite_diff_check  # noqa: F401
from .models import (build_bilstm_model, build_cnn_model,  # noqa: F401
                     build_combined_model, build_model, predict)
from .optim import TrainConfig, train  # noqa: F401
from .report import confusion, metrics  # noqa: F401

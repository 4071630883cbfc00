"""From-scratch numpy layers, models, Adam and checkpoints."""

from .layers import (GATE_ORDER, LstmParams, ShapeError, StaleCacheError, conv2d_backward,
                     conv2d_forward, dense_backward, dense_forward, dropout, lstm_backward,
                     lstm_forward, maxpool2x2_backward, maxpool2x2_forward, mse, softmax,
                     softmax_crossentropy, time_distributed_dense)
from .models import CnnClassifier, CnnSpec, LstmRegressor
from .optim import Adam, NonFiniteGradientError, ParamStore
from .checkpoint import load_model, save_model

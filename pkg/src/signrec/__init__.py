"""Isolated sign language recognition from RGB and depth clips.

CNN per-frame features, an optional feature pooling module, recurrent
temporal modelling with optional attention, plus the data, training,
evaluation and visualisation tooling around them.
"""

from .data import ClipLoader, DataConfig
from .evaluation import EvalReport, PredictionSet, build_report, evaluate, evaluate_test_sets
from .manifest import Manifest, SampleRecord, SplitSpec, load_manifest
from .model import ModelConfig, SignRecognizer, build_model, load_checkpoint, model_forward
from .training import TrainConfig, train

__version__ = "0.1.0"

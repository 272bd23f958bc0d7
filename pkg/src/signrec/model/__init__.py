from .backbone import Backbone, backbone_forward, standin_backbone, vgg16_backbone
from .checkpoint import CheckpointError, load_checkpoint, model_from_checkpoint, save_checkpoint
from .components import (
    AttentionOutput,
    AttentionParams,
    BLSTMEncoder,
    FeaturePoolingModule,
    LSTMEncoder,
    TemporalAttention,
    blstm_encode,
    classify,
    fpm_forward,
    global_average_pool,
    late_fuse,
    lstm_encode,
    temporal_attention,
)
from .network import VARIANTS, ModelConfig, SignRecognizer, build_model, model_forward

"""Bridge from pretrained VGG-19 to SFT1 tensor directories."""

from .export import (
    LAYER_INDEX,
    MEAN_RGB,
    ModelUnavailable,
    UnknownLayer,
    export_features,
    export_weights,
    layer_names,
    load_vgg19,
    preprocess,
    read_manifest,
)
from .sft import FormatError, read_sft, write_sft

__version__ = "0.1.0"

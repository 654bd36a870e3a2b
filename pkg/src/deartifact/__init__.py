"""Residual-CNN post-processing for block-codec images.

Library layout:
  nn         — network forward pass, weights, initialization
  training   — MSE/backprop/Adam training loop with early stopping
  tiling     — memory-bounded overlap-save inference
  allocator  — per-image quality selection under a size budget (exact MCKP)
  container  — selector-byte container and pluggable base codecs
  toycodec   — hermetic 8x8 block-DCT stand-in codec
  metrics    — PSNR, MS-SSIM, bits per pixel
  cli        — `deartifact` command-line entry point
"""

from .nn import (
    ConvWeights,
    ModelWeights,
    NetworkConfig,
    ResidualBlockWeights,
    conv2d,
    conv_layer_count,
    init_weights,
    network_forward,
    parameter_count,
    selu,
)
from .tiling import effective_kernel_size, plan_tiles, tiled_forward
from .allocator import Allocation, AllocationInstance, brute_force, solve
from .container import PASSTHROUGH, decode_image, encode_image, unwrap, wrap
from .toycodec import ToyCodec
from .metrics import QualityReport, bpp, corpus_report, ms_ssim, psnr

__version__ = "0.1.0"

__all__ = [
    "Allocation",
    "AllocationInstance",
    "ConvWeights",
    "ModelWeights",
    "NetworkConfig",
    "PASSTHROUGH",
    "QualityReport",
    "ResidualBlockWeights",
    "ToyCodec",
    "bpp",
    "brute_force",
    "conv2d",
    "conv_layer_count",
    "corpus_report",
    "decode_image",
    "effective_kernel_size",
    "encode_image",
    "init_weights",
    "ms_ssim",
    "network_forward",
    "parameter_count",
    "plan_tiles",
    "psnr",
    "selu",
    "solve",
    "tiled_forward",
    "unwrap",
    "wrap",
]

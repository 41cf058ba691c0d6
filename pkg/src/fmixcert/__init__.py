"""Certified robustness against spectral corruptions: FourierMix augmentation,
hierarchical consistency training, randomized-smoothing certification and a
power-law Fourier corruption benchmark."""

from .augment import FourierMixConfig, fouriermix, gaussian_augment
from .benchgen import BenchmarkSpec, default_grid, generate_f_image, generate_f_suite
from .certify import ABSTAIN, CertConfig, CertResult, acr, certified_radius, macr, smoothed_certify
from .datasets import LabeledDataset, load_cifar_binary, synth_shapes
from .errors import (CheckpointVersionError, CorruptCheckpointError, DegenerateNoiseError,
                     DomainError, FormatError, InvalidParameterError)
from .model import MlpClassifier, load_checkpoint, save_checkpoint
from .numerics import Rng, Spectrum, clopper_pearson_lower, fft2, ifft2, std_normal_inv_cdf
from .spectral import Band, classify_band, fourier_basis, sensitivity_heatmap
from .train import HcrConfig, TrainConfig, hcr_loss, total_loss

__version__ = "0.1.0"

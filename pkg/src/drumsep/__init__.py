"""Drum source separation toolkit: masking U-Nets, NMF baselines, dataset
synthesis, stochastic augmentation, and nSDR/RTR evaluation."""

__version__ = "0.1.0"

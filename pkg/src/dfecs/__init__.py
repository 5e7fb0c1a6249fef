"""Data-driven facial expression coding: keypoint standardization, keypoint
motion matrices, a two-level sparse factorization and its evaluation."""

__version__ = "0.1.0"

"""Manifests, training, evaluation, synthetic data and experiment grids."""

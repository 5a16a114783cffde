"""Perturbation synthesis and evaluation toolkit for RGB-D SLAM robustness benchmarks."""

__version__ = "0.1.0"

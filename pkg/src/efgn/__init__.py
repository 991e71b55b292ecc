"""Speech enhancement GAN with depthwise-separable dense encoder, TS-conformer, and pruning."""

__all__ = ["__version__"]

__version__ = "0.1.0"

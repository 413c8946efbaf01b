"""Mask-guided latent-diffusion hair editing toolkit."""

__version__ = "0.1.0"

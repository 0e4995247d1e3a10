"""Heavy-tailed variational autoencoders on polar coordinates."""

__version__ = "0.1.0"

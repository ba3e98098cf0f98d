"""Bridge from PyTorch training code to the boxcert interchange format."""

__version__ = "0.1.0"

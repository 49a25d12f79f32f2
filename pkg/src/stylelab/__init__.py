"""Unsupervised text style transfer laboratory.

A GRU encoder-decoder trained under denoising, backtranslation, adversarial
and minimum-risk supervision, plus the automatic evaluation suite used to
compare them.
"""

__version__ = "0.1.0"

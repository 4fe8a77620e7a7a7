"""Occlusion-robust video fall detection toolkit.

Synthesizes joint-anchored dynamic occlusions onto video corpora, extracts
dynamic Haar motion/appearance features over 4-frame windows, and trains a
feature-selection (AdaBoost) plus classifier (linear SVM) stage under a
weighted cost that balances normal and occluded samples.
"""

__version__ = "0.1.0"

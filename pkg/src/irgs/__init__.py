"""Unsupervised scene decomposition by reconstruction quality and local clustering.

Each slot reconstructs the image given the still-unexplained mask, keeps the
pixels it reconstructs well, and narrows them to one object with a small
two-component GMM around the best-reconstructed area.
"""
__version__ = "0.1.0"

"""Raga recognition toolkit: audio features, spectrogram images, a small numpy
training engine and confusion-matrix evaluation."""

__version__ = "0.1.0"

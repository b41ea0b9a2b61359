"""Figures of merit of a spectrally filtered, pulse-pumped two-level emitter."""
__version__ = "0.1.0"

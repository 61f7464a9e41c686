"""Grad-CAM explanations for partial-spoof countermeasures on synthetic spliced speech."""

__version__ = "0.1.0"

"""Open-set object detection benchmark construction and evaluation."""

__version__ = "0.1.0"

"""Agave crop segmentation pipeline and labeling workbench."""

__version__ = "0.1.0"

"""Boundary-distance regression and pixel classification for 2-D shape segmentation."""

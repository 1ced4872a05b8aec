"""Cooperative face liveness detection from dense optical flow.

Pipeline: approaching-face capture protocol -> keypoint alignment and
margin cropping -> coarse-to-fine variational optical flow -> clipped
flow magnitude -> dual-stream (flow + RGB) features -> logistic verdict.
A synthetic scene simulator provides labeled recordings with analytic
ground-truth flow for every supported attack class.
"""

__version__ = "0.1.0"

"""Synthetic approaching-face scenes with analytic ground truth."""

from .dataset import (CLASS_ORDER, SimDataset, load_dataset, load_sequence,
                      make_dataset, save_dataset, save_sequence)
from .scene import (SCREEN_CLASSES, AttackClass, RenderedSequence, SceneSpec,
                    SimulatorError, ground_truth_flow, render)

__all__ = [
    "CLASS_ORDER", "SimDataset", "load_dataset", "load_sequence",
    "make_dataset", "save_dataset", "save_sequence", "SCREEN_CLASSES",
    "AttackClass", "RenderedSequence", "SceneSpec", "SimulatorError",
    "ground_truth_flow", "render",
]

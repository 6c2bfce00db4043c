"""Synthetic scenes and toy training experiments."""

from reldetr.toyexp.models import VARIANTS, ExperimentReport, LossPoint, Scene, TrainConfig

__all__ = ["VARIANTS", "ExperimentReport", "LossPoint", "Scene", "TrainConfig"]

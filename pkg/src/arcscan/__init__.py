"""Compressed learning on angle-resolved scattering (ARS) images.

Arc and point selection by particle swarm optimization, scored by a
Fisher/LDA classifier on simple statistical features.
"""
__version__ = "0.1.0"

from .core import (SIZE, ArcSet, ArsImage, DeficiencyClass, PointMask, apply_mask, arc_to_angles,
                   extract_arcs, paired_arc)
from .datagen import GenConfig, NoiseSpec, generate_dataset
from .features import CANDIDATE_POOL, DEFAULT_FEATURES, FeatureMatrix, extract, extract_dataset, rfe
from .lda import LdaModel, fit, predict
from .pso import PsoConfig, optimize
from .pipeline import ExperimentConfig, RunReport

"""Continuous depth estimation from 4D light fields through a generative model."""
from .errors import *  # noqa: F401,F403
from .lightfield import (CoherenceMap, DepthMap, Epi, LightField, SubApertureImage,
                         epi_h, epi_v, load_depthmap, load_lightfield, save_depthmap,
                         save_lightfield, subaperture)
from .local_depth import StructureTensorParams, fuse_estimates, local_depth_all, local_depth_epi
from .nlm import NlmParams, NlmWeightGraph, nlm_weights
from .propagation import propagate, propagation_objective_and_gradient
from .renderer import TriangularKernel, render_gradient, render_lightfield, triangular, triangular_deriv
from .refine import RefineParams, nlm_prior_and_gradient, refine_depth
from .synthgen import Layer, SceneSpec, generate
from .evaluation import PipelineConfig, rmse, run_pipeline

__version__ = "0.1.0"

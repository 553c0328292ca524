"""Hyperbolic geometry in the Lorentz model, nested-hyperboloid dimensionality
reduction and a small nested hyperbolic graph convolutional network.

Submodules
----------
lorentz    inner products, exp/log maps, distances, means, sampling
group      Lorentz transformations and their factorizations
nested     nested hyperboloid embeddings, projections and stacks
optim      Riemannian block-coordinate descent on SO(k) and Stiefel frames
reduction  nested-hyperboloid fitting and the tangent-PCA baseline
nhgcn      the graph network, decoders, training and metrics
datasets   synthetic generators and the tree embedder
io         file formats
cli        the ``nestedhyp`` command
"""

from .config import TOL, Tolerances, override, set_tolerances
from .errors import *  # noqa: F401,F403
from .group import (
    adapted_gram_schmidt,
    axis_decompose,
    boost_along_first_axis,
    compose,
    lorentz_inverse,
    origin_boost,
    polar_decompose,
    pure_boost,
    random_lorentz,
    random_rotation,
    rotation_embed,
)
from .lorentz import (
    exp_map,
    frechet_mean,
    from_poincare,
    geodesic_distance,
    lift,
    log_map,
    lorentz_centroid,
    lorentz_inner,
    lorentz_norm,
    minkowski_form,
    origin,
    sample_wrapped_normal,
    to_poincare,
)
from .nested import NestingLevel, NestingStack, embed, project, stack_embed, stack_project
from .reduction import ReductionConfig, fit_nh, fit_tangent_pca

__version__ = "0.1.0"

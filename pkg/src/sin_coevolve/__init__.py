"""
Co-evolving user/item embeddings on curvature-varying manifolds
"""

__version__ = "1.0.0"

# registers the differentiable primitives of each module
from . import geometry, curvature, model, contrast  # noqa: E402,F401

"""polylab: facet discovery for unknown convex polytopes from noisy
membership line searches, with a large-margin sparse fitter and an
active-learning query loop."""

from . import active, errors, fitter, geometry, metrics, models, oracle

__all__ = ["active", "errors", "fitter", "geometry", "metrics", "models", "oracle"]
__version__ = "0.1.0"

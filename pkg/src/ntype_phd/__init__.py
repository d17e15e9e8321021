"""N-type Gaussian-mixture PHD filtering for multi-target, multi-type tracking."""
from .gaussian import GaussianComponent, mvn_logpdf, predict_component, update_component, gaussian_product_marginal
from .phd import (
    FilterConfig,
    IndependentGMPHD,
    NTypeGMPHD,
    TypedEstimate,
    TypedIntensity,
    birth_intensity,
    confusion_clutter_logintensity,
    extract_states,
    predict,
    prune_and_merge,
    step,
    update,
)

__version__ = "0.1.0"

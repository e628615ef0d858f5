"""Mean dimension of radial basis functions and Keister's function.

Submodules:

- ``lowdisc``: Sobol' points, nested uniform scrambling, midpoint grids
- ``special``: normal and chi-square quantiles
- ``model``: integrands, input laws, moment summaries
- ``anova``: exact functional ANOVA on finite grids
- ``estimate``: randomized-QMC estimators of total indices and mean dimension
- ``theory``: product-form closed forms, the theta tuner, moment expansions
- ``cli``: experiment front end (``meandim`` on the command line)
"""

from .anova import AnovaResult, exact_anova
from .estimate import (
    EstimateReport,
    estimate_mean_dimension_generic,
    estimate_mean_dimension_radial,
    estimate_mean_dimension_weighted,
)
from .model import (
    ChiSquare,
    FiniteDiscrete,
    GaussianProduct,
    InputModel,
    Keister,
    Multiquadric,
    MultiquadricZ,
    NormalShift,
    StandardNormal,
)
from .theory import gaussian_rho, product_mean_dimension, theorem_nu_bound, tune_theta

__version__ = "0.1.0"

__all__ = [
    "AnovaResult",
    "ChiSquare",
    "EstimateReport",
    "FiniteDiscrete",
    "GaussianProduct",
    "InputModel",
    "Keister",
    "Multiquadric",
    "MultiquadricZ",
    "NormalShift",
    "StandardNormal",
    "estimate_mean_dimension_generic",
    "estimate_mean_dimension_radial",
    "estimate_mean_dimension_weighted",
    "exact_anova",
    "gaussian_rho",
    "product_mean_dimension",
    "theorem_nu_bound",
    "tune_theta",
]

"""Testable learning of polynomial threshold functions under the Gaussian, at desk scale."""

__version__ = "0.1.0"

from tpt.algebra import (  # noqa: E402
    Polynomial,
    enumerate_multi_indices,
    poly_coeff_norms,
    poly_compose_linear,
    poly_eval,
    poly_multilinearize,
    poly_normalize,
)
from tpt.distributions import (  # noqa: E402
    DiscreteDistribution,
    GaussianBlockSpec,
    UnivariateWeight,
    gauss_hermite_product,
    gaussian_block_moment,
    lsl_certificate,
    perturb_weights,
    pushforward_density_1d,
    sample_gaussian,
    sample_gaussian_block,
    w_gamma_density,
)
from tpt.tester import (  # noqa: E402
    empirical_moments,
    gaussian_moment,
    moment_slack,
    required_samples,
    tamm_accept,
    theory_parameters,
)

__all__ = [
    "DiscreteDistribution",
    "GaussianBlockSpec",
    "Polynomial",
    "UnivariateWeight",
    "empirical_moments",
    "enumerate_multi_indices",
    "gauss_hermite_product",
    "gaussian_block_moment",
    "gaussian_moment",
    "lsl_certificate",
    "moment_slack",
    "perturb_weights",
    "poly_coeff_norms",
    "poly_compose_linear",
    "poly_eval",
    "poly_multilinearize",
    "poly_normalize",
    "pushforward_density_1d",
    "required_samples",
    "sample_gaussian",
    "sample_gaussian_block",
    "tamm_accept",
    "theory_parameters",
    "w_gamma_density",
]

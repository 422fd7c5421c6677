"""Stochastic treatment assignment rules from experimental data.

The toolkit turns a randomised-trial sample into a randomised assignment
rule: outcomes become bounded inverse-propensity weights, candidate linear
eligibility rules live on the unit sphere, and a von Mises-Fisher
distribution over rules is chosen by minimising a finite-sample upper
bound on welfare risk (Monte-Carlo risk plus a KL complexity penalty).
Exact Gibbs posteriors over finite rule sets, synthetic benchmark
experiments with known optimal rules, and a batch CLI round out the
package.
"""

__version__ = "0.1.0"

from .gibbs import BoundConfig, DiscretePolicySet, DiscretePosterior, pac_bound, solve_chi, tilt
from .gridfit import FitConfig, FitResult, best_deterministic, fit, kappa_profile, regret_rate_bound, risk_heatmap
from .policy import SphereGrid, build_grid, from_spherical, great_circle_distance, les_assign, normalize_direction, to_spherical
from .simulate import DgpConfig, experiment_config, generate, oracle_rule, population_regret
from .vmf import bessel_ratio, kl_to_uniform, kl_upper_bound, sample_vmf, vmf_moments
from .welfare import DatasetMeta, WeightedSample, compute_weights, empirical_risk, empirical_welfare, individual_propensities, posterior_risk_mc

from .estimators import DeterministicAssignmentPolicy, StochasticAssignmentPolicy  # noqa: E402  (needs dataio)

__all__ = [
    "__version__",
    "BoundConfig",
    "DiscretePolicySet",
    "DiscretePosterior",
    "pac_bound",
    "solve_chi",
    "tilt",
    "FitConfig",
    "FitResult",
    "best_deterministic",
    "fit",
    "kappa_profile",
    "regret_rate_bound",
    "risk_heatmap",
    "SphereGrid",
    "build_grid",
    "from_spherical",
    "great_circle_distance",
    "les_assign",
    "normalize_direction",
    "to_spherical",
    "DgpConfig",
    "experiment_config",
    "generate",
    "oracle_rule",
    "population_regret",
    "bessel_ratio",
    "kl_to_uniform",
    "kl_upper_bound",
    "sample_vmf",
    "vmf_moments",
    "DatasetMeta",
    "WeightedSample",
    "compute_weights",
    "empirical_risk",
    "empirical_welfare",
    "individual_propensities",
    "posterior_risk_mc",
    "DeterministicAssignmentPolicy",
    "StochasticAssignmentPolicy",
]

"""Vine copulas with exact non-simplified ground truths and simplifying-assumption diagnostics."""
__version__ = "0.1.0"

from .copulas import (EPS, FAMILIES, INDEPENDENCE, DomainError, PairCopula, TauRangeError,
                      param_to_tau, tau_range, tau_to_param)
from .structure import (Edge, RVineStructure, StructureError, ValidationReport, cvine, dvine,
                        edges_of, validate)
from .model import VineModel, independence_model
from .generators import (GroundTruthModel, NonSimplifiedVine, TrivariateArchimedean,
                         conditional_copula_amh, conditional_copula_frank, conditional_tau_curve,
                         fig2_mismatched_decomposition, fig2_true_model, fig4_model,
                         gaussian_regression_example, trivariate_amh, trivariate_frank)
from .fitting import (FitConfig, FitError, FitReport, PairFit, empirical_tau, fit_pair,
                      fit_sequential, fit_vine, select_structure)
from .diagnostics import (BinnedTauReport, DivergenceReport, binned_conditional_tau,
                          dinf_estimate, integrate_density, kl_estimate, sa_permutation_test)

"""gridflash: differentiable phase equilibria by discrete enumeration.

Binary (and pure-component) phase splits are found exactly on a composition
grid by enumerating every mass-balance-feasible pair of candidate states and
minimizing the lever-averaged Gibbs energy; a Boltzmann softmax over the same
candidates supplies smooth surrogate gradients, so parametric
excess-Gibbs-energy models can be fitted end-to-end from equilibrium
composition data.
"""

from .grids import (CompositionGrid, AugmentedGrid, SimplexGrid,
                    make_uniform_grid, augment_with_feed, make_simplex_grid)
from .models import (GeModel, IdealModel, MargulesModel, NRTLModel,
                     FlexibleModel, SymmetricTernaryModel, VdwHelmholtz,
                     GibbsCurve, ideal_mixing, eval_gmix, eval_curve,
                     second_derivative, param_gradient, vdw_reduced_helmholtz,
                     model_from_spec, NotTrainableError)
from .candidates import (CandidatePair, PairSet, StateGroup, GroupSet,
                         feasible_pairs, group_membership, enumerate_groups,
                         GroupBudgetError)
from .solver import (EquilibriumResult, StateDistribution, pair_energies,
                     pair_energy, hard_argmin, softmax_probs, soft_estimates,
                     pair_param_gradients, st_param_gradient, solve_binary,
                     formulation1_distribution, formulation2_distribution,
                     formulation2_state_marginal, cluster_phases,
                     local_maxima, reconstruct_gmix_expectation,
                     write_distribution_csv, RootBracketError)
from .training import (FitConfig, FitReport, direct_loss, hessian_loss,
                       gibbs_loss, total_loss, fit_system, metrics,
                       FitDivergedError)
from .applications import (DatasetRow, VleResult, LlleResult, generate_labels,
                           write_labels_csv, read_labels_csv, vapor_pressure,
                           solve_llle)

__version__ = "0.1.0"

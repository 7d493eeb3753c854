"""Case-control genotype analysis toolkit.

Balanced-error classification of ternary predictor data: MDR and its
independent-rule variant, logic regression over mod-3 expression trees
with simulated annealing, CART / random forests / stochastic gradient
boosting, permutation significance tests, and conditional variable
importance.
"""

__version__ = "0.1.0"

from .cart import ClassTree, best_split, cart_trainer, gini, grow_tree, tree_predict
from .data import (Dataset, FoldPlan, balance_resample, load_dataset,
                   make_folds, save_dataset, shuffle_then_fold)
from .ensemble import (CvimReport, RfModel, SgbModel, cvim, default_rf_size,
                       fit_rf, fit_sgb, rf_predict, rf_prob, rf_trainer,
                       sgb_predict, sgb_prob, sgb_trainer)
from .logicreg import (CoolingSchedule, FittedForest, Forest, anneal,
                       eval_tree, fit_beta, geometric_schedule, lr_predict,
                       lr_trainer, neighbors, score_L)
from .mdr import MdrModel, MdrSearchReport, fit_mdr, fit_mdrir, mdr_search, mdr_trainer
from .metrics import (CvError, DegenerateClassError, balanced_error_direct,
                      cv_error, empirical_cell_prob, empirical_set_prob,
                      optimal_rule, penalty, prevalence)
from .permtest import PermTestResult, column_permutation_importance, permutation_test
from .synth import GenSpec, bayes_balanced_error, generate, xor_pair_effect

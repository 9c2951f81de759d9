"""Kronecker time-varying graphical lasso for tensor time series."""

from .core import (KtvglConfig, KtvglResult, fit_ktvgl, fit_static_kgl, init_networks,
                   kron_logdet, ktvgl_objective, mode_covariance, normalize_factors,
                   trace_identity_check)
from .metrics import (MetricReport, auc_pr, auc_roc, best_f1, evaluate, score_edges,
                      tdr, temporal_deviation)
from .synthetic import GroundTruth, gen_er_precision, gen_network_path, sample_series
from .tensor import (KroneckerCapError, TensorSeries, flatten_series, fold, kron_list,
                     mode_product_all_except, unfold)
from .tvgl import (AdmmState, PenaltySpec, TvglConfig, TvglResult, prox_logdet,
                   prox_offdiag_l1, prox_temporal_pair, solve_tvgl, tvgl_objective)

__version__ = "0.1.0"

"""Deep neural mixture models for density estimation, with classical baselines."""

from .baselines import Gmm, KnnModel, ParzenModel, gmm_fit
from .evaluation import (IseResult, ise_mc, ise_simpson_1d, mean_log_likelihood,
                         relative_ise_reduction, welch_t_test)
from .integration import (AnnealSchedule, DomainBox, IntegrationBatch, ProposalConfig,
                          alpha, estimate_integral, metropolis_hastings,
                          sample_integration_points, sample_proposal)
from .mixture import Dnmm, TrainConfig, mixing_coefficients, train
from .network import DeepNet
from .synthdata import FtMixture, MGev, ft_random_task, mgev_random_task

__version__ = "0.1.0"

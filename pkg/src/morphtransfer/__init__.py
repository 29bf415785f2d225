"""Transfer of manipulation skills between morphologically different planar
arms through learned invariant feature spaces."""

from . import alignment, baselines, cli, dynamics, embedding, trajopt, transfer
from .dynamics import (
    DomainSpec,
    DomainState,
    MorphologySpec,
    TendonSpec,
    Trajectory,
    forward_kinematics,
    make_domain,
    rollout,
    step,
)
from .embedding import EmbeddingModel, PairSet, TrainConfig, embed, train_embedding
from .errors import BackwardPassError, ConfigError, DynamicsFitError, NumericalError, StageError
from .trajopt import LinearGaussianPolicy, LocalDynamicsModel, fit_dynamics, ilqg_backward
from .transfer import RlConfig, TransferConfig, alpha_at, run_transfer, transfer_cost

__version__ = "0.1.0"

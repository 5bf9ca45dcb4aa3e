"""Risk-sensitive stochastic control by maximum-likelihood estimation in an
equivalent state-space model, with score estimates from a Rao-Blackwellized
conditional particle filter."""

from .environments import EnvSpec, build_problem, make_env
from .errors import (ConfigurationError, DegenerateWeightsError,
                     NumericalError, ScoreclimbError)
from .oracle import (LinearGaussianProblem, analytic_score, finite_diff_grad,
                     kalman_smoother, log_marginal, sample_smoother)
from .policies import ActionSample, LinearGaussianPolicy, TanhGaussianPolicy
from .smc import (BackwardDraw, ParticleSystem, backward_sample, csmc_forward,
                  csmc_kernel, multinomial_resample, rb_csmc_score, smc_forward,
                  smc_score)
from .ssm import (ControlProblem, GaussianDynamics, LinearDynamics, StateAction,
                  Trajectory, grad_log_joint, log_joint, obs_loglik)
from .training import (LearningCurve, TrainConfig, TrainerState,
                       evaluate_policy, init_reference, msc_step, step_size,
                       train)

__version__ = "0.1.0"

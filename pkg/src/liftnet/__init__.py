"""Lifted neural networks: activations as minimisers of a convex energy.

Training by standard lifted loss, contrastive loss or back-propagation.
"""

from ._backend import BACKEND
from .energy import (DualState, EnergyBreakdown, clamped_energy, dual_clamped_energy,
                     dual_free_energy, duality_gap, free_energy, primal_to_dual)
from .inference import coord_update, infer_clamped, infer_free, solve
from .netspec import (ActivationState, ConstraintSet, NetworkSpec, Weights, forward_pass,
                      init_weights, project)
from .training import (GradientSet, RunMetrics, TrainConfig, bp_equivalence_report,
                       contrastive_lr, finite_diff_grad, grad_backprop, grad_contrastive,
                       grad_standard_lifted, sgd_step, train)

__version__ = "0.1.0"

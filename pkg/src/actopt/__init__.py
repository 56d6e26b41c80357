"""LQR-optimal actuator shape design for a damped Euler-Bernoulli beam."""

from .beam import BeamParams, ModalBasis, ModalSystem, assemble_system, h_norm_sq
from .lqr import closed_loop_sim, kalman_gain, open_loop_sim, optimal_cost, solve_dre
from .shape import ActuatorShape, Grid, LevelSet, input_vector, measure
from .topo import OptimizerConfig, continuation, optimize_shape, topological_gradient

__version__ = "0.1.0"

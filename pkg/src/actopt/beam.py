"""Modal discretization of a simply supported, damped Euler-Bernoulli beam.

The beam on (0, 1) is expanded in the eigenfunctions of the fourth-derivative
operator with hinged ends, phi_n(x) = sqrt(2) sin(n pi x), lambda_n = (n pi)^4.
Mode n then obeys

    a_n'' = -lambda_n a_n - (C_d lambda_n + mu) a_n' + b_n u

and the state is packed as Z = (a_1..a_N, a_1'..a_N').  The state weight Q
reproduces the energy norm int (w'')^2 + w^2 + v^2 dx in these coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .shape import Grid


@dataclass(frozen=True)
class BeamParams:
    """Physical and cost parameters of one actuator-design problem.

    Attributes:
        kelvin_voigt: Kelvin-Voigt (strain-rate) damping coefficient C_d.
        viscous: viscous damping coefficient mu.
        control_penalty: weight gamma on u^2 in the LQR cost.
        horizon: final time tau.
        volume_penalty: weight alpha of the quadratic actuator-size penalty.
        volume_target: target actuator measure c.
        n_modes: number of retained modes N.
    """

    kelvin_voigt: float = 1e-4
    viscous: float = 1e-3
    control_penalty: float = 1e-3
    horizon: float = 200.0
    volume_penalty: float = 0.1
    volume_target: float = 0.4
    n_modes: int = 40

    def __post_init__(self):
        if self.kelvin_voigt < 0 or self.viscous < 0:
            raise ValueError("damping coefficients must be non-negative")
        if not self.control_penalty > 0:
            raise ValueError("control_penalty must be positive")
        if not self.horizon > 0:
            raise ValueError("horizon must be positive")
        if self.volume_penalty < 0:
            raise ValueError("volume_penalty must be non-negative")
        if not 0 < self.volume_target < 1:
            raise ValueError("volume_target must lie strictly inside (0, 1)")
        if int(self.n_modes) != self.n_modes or self.n_modes < 1:
            raise ValueError("n_modes must be a positive integer")


def eigenvalue(n):
    """Eigenvalue (n pi)^4 of the hinged-hinged bending operator."""
    if n < 1:
        raise ValueError(f"mode index must be >= 1, got {n}")
    return (n * np.pi) ** 4


def mode_eval(n, x):
    """Evaluate the L2-normalized mode sqrt(2) sin(n pi x).

    ``x`` may be a scalar or an array; every entry must lie in [0, 1].
    """
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > 1):
        raise ValueError("x must lie in [0, 1]")
    out = np.sqrt(2.0) * np.sin(n * np.pi * x)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ModalBasis:
    n_modes: int
    eigenvalues: np.ndarray = field(repr=False)

    @classmethod
    def create(cls, n_modes):
        if n_modes < 1:
            raise ValueError("n_modes must be >= 1")
        n = np.arange(1, n_modes + 1)
        return cls(n_modes, (n * np.pi) ** 4.0)

    @property
    def indices(self):
        return np.arange(1, self.n_modes + 1)

    def evaluate(self, x):
        """Mode values at points ``x``, shape (N, len(x))."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        return np.sqrt(2.0) * np.sin(np.outer(self.indices, x) * np.pi)

    def evaluate_d2(self, x):
        """Second spatial derivative of every mode at ``x``, shape (N, len(x))."""
        k = self.indices * np.pi
        return -(k**2)[:, None] * self.evaluate(x)


@dataclass(frozen=True)
class ModalSystem:
    """Linear system Z' = A Z + B u with quadratic state weight Q.

    The beam assembly fills these with the modal block structure, but any
    square system (e.g. a scalar test problem) may be stored here.
    """

    a_matrix: np.ndarray
    b_vector: np.ndarray
    q_matrix: np.ndarray

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a_matrix, dtype=float))
        b = np.atleast_1d(np.asarray(self.b_vector, dtype=float))
        q = np.atleast_2d(np.asarray(self.q_matrix, dtype=float))
        n = a.shape[0]
        if a.shape != (n, n) or q.shape != (n, n) or b.shape != (n,):
            raise ValueError(
                f"inconsistent shapes A{a.shape}, B{b.shape}, Q{q.shape}")
        for name, arr in (("a_matrix", a), ("b_vector", b), ("q_matrix", q)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def dim(self):
        return self.a_matrix.shape[0]


def state_weight(basis):
    lam = basis.eigenvalues
    return np.diag(np.concatenate([lam + 1.0, np.ones_like(lam)]))


def assemble_system(params, b):
    """Build the first-order modal system for input coefficients ``b``.

    Args:
        params: beam and cost parameters; only damping and N are used here.
        b: length-N vector of actuator coefficients <phi_n, chi_omega>.

    Returns:
        ModalSystem with A = [[0, I], [-Lambda, -(C_d Lambda + mu I)]],
        B = (0, b) and Q = diag(Lambda + I, I).
    """
    n_modes = params.n_modes
    b = np.asarray(b, dtype=float)
    if b.shape != (n_modes,):
        raise ValueError(
            f"input vector has shape {b.shape}, expected ({n_modes},)")
    basis = ModalBasis.create(n_modes)
    lam = basis.eigenvalues
    a = np.zeros((2 * n_modes, 2 * n_modes))
    a[:n_modes, n_modes:] = np.eye(n_modes)
    a[n_modes:, :n_modes] = -np.diag(lam)
    a[n_modes:, n_modes:] = -np.diag(params.kelvin_voigt * lam + params.viscous)
    bb = np.concatenate([np.zeros(n_modes), b])
    return ModalSystem(a, bb, state_weight(basis))


def _coefficients(data, basis, grid):
    if callable(data):
        # L2 projection with a 4-point Gauss rule per cell
        nodes, weights = np.polynomial.legendre.leggauss(4)
        if grid is None:
            grid = Grid(max(200, 10 * basis.n_modes))
        left = grid.edges[:-1]
        h = grid.cell_width
        x = (left[:, None] + 0.5 * h * (nodes + 1.0)).ravel()
        w = np.tile(0.5 * h * weights, grid.n_cells)
        return basis.evaluate(x) @ (np.asarray(data(x), dtype=float) * w)
    arr = np.asarray(data, dtype=float)
    if arr.shape == (basis.n_modes,):
        return arr.copy()
    if grid is not None and arr.shape == (grid.n_cells,):
        # midpoint rule on the shape grid
        return basis.evaluate(grid.centers) @ arr * grid.cell_width
    raise ValueError(
        f"cannot interpret data of shape {arr.shape} as modal coefficients "
        f"(N={basis.n_modes}) or grid samples")


def project_initial_condition(w0, v0, basis, grid=None):
    """Modal coordinates Z(0) of the displacement/velocity pair (w0, v0).

    Each of ``w0`` and ``v0`` may be a length-N coefficient vector (used
    verbatim), a callable of x (projected with Gauss quadrature), or samples
    at the cell centers of ``grid`` (projected with the midpoint rule).
    """
    a = _coefficients(w0, basis, grid)
    adot = _coefficients(v0, basis, grid)
    return np.concatenate([a, adot])


def initial_state_from_modes(modes, basis):
    """Displacement-only initial state from ``[(n, amplitude_of_sin), ...]``.

    The amplitude multiplies sin(n pi x), so the modal coefficient is
    amplitude / sqrt(2).
    """
    z = np.zeros(2 * basis.n_modes)
    for n, amp in modes:
        if not 1 <= n <= basis.n_modes:
            raise ValueError(f"mode {n} outside 1..{basis.n_modes}")
        z[n - 1] += amp / np.sqrt(2.0)
    return z


def h_norm_sq(z, basis):
    """Energy norm sum (lambda_n + 1) a_n^2 + sum a_n'^2 of a modal state."""
    z = np.asarray(z, dtype=float)
    n = basis.n_modes
    if z.shape[-1] != 2 * n:
        raise ValueError(f"state has {z.shape[-1]} entries, expected {2 * n}")
    a, adot = z[..., :n], z[..., n:]
    return np.sum((basis.eigenvalues + 1.0) * a**2, axis=-1) + np.sum(adot**2, axis=-1)


def displacement_field(z, basis, x):
    """w(x) = sum a_n phi_n(x) for one state or a (T, 2N) stack of states."""
    z = np.asarray(z, dtype=float)
    return z[..., : basis.n_modes] @ basis.evaluate(x)


def velocity_field(z, basis, x):
    z = np.asarray(z, dtype=float)
    return z[..., basis.n_modes:] @ basis.evaluate(x)

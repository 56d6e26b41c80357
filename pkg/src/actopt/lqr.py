"""Finite-horizon LQR: differential Riccati equation, feedback and trajectories.

For  Z' = A Z + B u  with cost  int_0^tau Z'QZ + gamma u^2 dt  the value
matrix solves, backward from Pi(tau) = 0,

    Pi' = -A'Pi - Pi A + Pi S Pi - Q,     S = B B' / gamma,

and the optimal feedback is u = -(1/gamma) B' Pi(t) Z.

Two solvers are provided.  ``"rk4"`` marches the equation with the classical
fourth-order Runge-Kutta scheme and stores every snapshot; it is only stable
while the step resolves the fastest dynamics (|h * eig| of order one).
``"decoupled"`` writes Pi = X - D with X the stabilizing algebraic solution;
D then has the closed form

    D(s) = E(s)' X (I - G(s) X)^{-1} E(s),   E(s) = exp(Ac s),
    G(s) = W - E(s) W E(s)',                 Ac W + W Ac' = -S,

with s = tau - t and Ac = A - S X.  Only decaying exponentials appear, so
the result is exact for any time grid, which is what the stiff damped beam
(Kelvin-Voigt rates of order 1e4 at N = 40) requires.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg as sla


class RiccatiError(ArithmeticError):
    """The Riccati solve or a closed-loop simulation produced unusable values."""


def _time_grid(tau, n_steps):
    if not tau > 0:
        raise ValueError("tau must be positive")
    if int(n_steps) != n_steps or n_steps < 1:
        raise ValueError("n_steps must be a positive integer")
    return np.linspace(0.0, tau, int(n_steps) + 1)


def _sym(m):
    return 0.5 * (m + m.T)


def _power_orbit(e, v, count, block=256):
    """Rows v, e v, e^2 v, ..., e^(count-1) v."""
    n = v.shape[0]
    block = max(1, min(block, count))
    powers = np.empty((block, n, n))
    powers[0] = np.eye(n)
    for m in range(1, block):
        powers[m] = e @ powers[m - 1]
    jump = e @ powers[block - 1]
    out = np.empty((count, n))
    start = v.astype(float)
    for k0 in range(0, count, block):
        m = min(block, count - k0)
        out[k0:k0 + m] = powers[:m] @ start
        start = jump @ start
    return out


@dataclass(frozen=True)
class Trajectory:
    """Sampled closed- or open-loop solution.

    ``adjoint_coeffs`` holds the velocity block of 2 Pi(t) Z(t), one row of
    N values per sample.
    """

    times: np.ndarray = field(repr=False)
    state: np.ndarray = field(repr=False)
    control: np.ndarray = field(repr=False)
    adjoint_coeffs: np.ndarray = field(repr=False)

    @property
    def n_modes(self):
        return self.state.shape[1] // 2


class RiccatiSolution:
    """Dense snapshots Pi(t_k) on a uniform grid, t_0 = 0 ... t_K = tau."""

    def __init__(self, times, matrices, gamma):
        self.times = np.asarray(times, dtype=float)
        self.gamma = gamma
        self._matrices = np.asarray(matrices, dtype=float)

    @property
    def tau(self):
        return float(self.times[-1])

    @property
    def n_steps(self):
        return len(self.times) - 1

    @property
    def matrices(self):
        return self._matrices

    def pi(self, k):
        return self._matrices[k]

    @property
    def pi0(self):
        return self.pi(0)


class DecoupledRiccatiSolution(RiccatiSolution):
    """Closed-form DRE solution around the stabilizing algebraic solution.

    Snapshots are evaluated on demand, so long, finely sampled horizons do
    not need N^2 storage per time step.
    """

    def __init__(self, times, system, gamma):
        self.times = np.asarray(times, dtype=float)
        a = system.a_matrix
        b = system.b_vector
        q = system.q_matrix
        n = a.shape[0]
        self.gamma = gamma
        self.s_matrix = np.outer(b, b) / gamma
        try:
            x = sla.solve_continuous_are(a, b[:, None], q, np.array([[gamma]]))
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise RiccatiError(
                f"no stabilizing algebraic Riccati solution ({exc}); "
                "use method='rk4' for undamped or unstabilizable systems") from exc
        x = _sym(x)
        ac = a - self.s_matrix @ x
        if not np.all(np.isfinite(x)) or np.max(np.linalg.eigvals(ac).real) >= 0:
            raise RiccatiError(
                "algebraic Riccati solution is not stabilizing; "
                "use method='rk4' for undamped or unstabilizable systems")
        self.stationary = x
        self.closed_loop_matrix = ac
        with warnings.catch_warnings():
            # lightly damped modes come in near-imaginary pairs; the residual
            # check below decides whether the perturbed solve is acceptable
            warnings.simplefilter("ignore", RuntimeWarning)
            w = _sym(sla.solve_continuous_lyapunov(ac, -self.s_matrix))
        scale = max(np.abs(self.s_matrix).max(), 1e-300)
        if np.abs(ac @ w + w @ ac.T + self.s_matrix).max() > 1e-6 * scale:
            raise RiccatiError("closed-loop Lyapunov equation could not be solved accurately")
        self.gramian = w
        self._eye = np.eye(n)

    def _propagator(self, s):
        return sla.expm(self.closed_loop_matrix * s)

    def _deviation(self, e):
        x, w = self.stationary, self.gramian
        g = w - e @ w @ e.T
        return e.T @ x @ np.linalg.solve(self._eye - g @ x, e)

    def pi(self, k):
        s = self.tau - self.times[k]
        return _sym(self.stationary - self._deviation(self._propagator(s)))

    @cached_property
    def pi0(self):
        return self.pi(0)

    @cached_property
    def terminal_costate_map(self):
        """Matrix taking Z(0) to (Pi - X) Z evaluated at t = tau."""
        x, w = self.stationary, self.gramian
        e = self._propagator(self.tau)
        g = w - e @ w @ e.T
        return -x @ np.linalg.solve(self._eye - g @ x, e), e

    @cached_property
    def step_propagator(self):
        return self._propagator(self.tau / self.n_steps)

    @property
    def matrices(self):
        return np.stack([self.pi(k) for k in range(len(self.times))])


def solve_dre(system, gamma, tau, n_steps, method="rk4"):
    """Solve the differential Riccati equation backward from Pi(tau) = 0.

    Args:
        system: ModalSystem holding A, B and Q.
        gamma: control weight, > 0.
        tau: horizon.
        n_steps: number of uniform time intervals.
        method: ``"rk4"`` (classical Runge-Kutta, dense storage) or
            ``"decoupled"`` (exact closed form, needs a stabilizing
            algebraic solution).

    Raises:
        RiccatiError: non-finite values during RK4 marching (step too large)
            or no stabilizing algebraic solution for ``"decoupled"``.
    """
    if not gamma > 0:
        raise ValueError("gamma must be positive")
    times = _time_grid(tau, n_steps)
    if method == "decoupled":
        return DecoupledRiccatiSolution(times, system, gamma)
    if method != "rk4":
        raise ValueError(f"unknown method {method!r}")

    a, b, q = system.a_matrix, system.b_vector, system.q_matrix
    s_mat = np.outer(b, b) / gamma
    h = tau / n_steps

    # reverse time s = tau - t:  dPi/ds = A'Pi + Pi A - Pi S Pi + Q
    def rhs(p):
        ap = a.T @ p
        return ap + ap.T - p @ s_mat @ p + q

    out = np.empty((n_steps + 1,) + a.shape)
    p = np.zeros_like(a)
    out[n_steps] = p
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(n_steps - 1, -1, -1):
            k1 = rhs(p)
            k2 = rhs(p + 0.5 * h * k1)
            k3 = rhs(p + 0.5 * h * k2)
            k4 = rhs(p + h * k3)
            p = _sym(p + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4))
            if not np.all(np.isfinite(p)):
                raise RiccatiError(
                    f"Riccati integration diverged at t={times[k]:.6g} "
                    f"with step {h:.3g}; increase n_steps")
            out[k] = p
    return RiccatiSolution(times, out, gamma)


def optimal_cost(riccati, z0, alpha, vol, c):
    """Z0' Pi(0) Z0 + alpha (vol - c)^2."""
    z0 = np.asarray(z0, dtype=float)
    return float(z0 @ riccati.pi0 @ z0) + alpha * (vol - c) ** 2


def kalman_gain(riccati, system, gamma):
    """Feedback row -(1/gamma) B' Pi(0)."""
    return -(system.b_vector @ riccati.pi0) / gamma


def _finish(times, z, p, b, gamma):
    n = z.shape[1] // 2
    u = -(p @ b) / gamma
    if not (np.all(np.isfinite(z)) and np.all(np.isfinite(u))):
        raise RiccatiError("closed-loop state is not finite; refine the time grid")
    return Trajectory(times, z, u, 2.0 * p[:, n:])


def closed_loop_sim(system, riccati, z0):
    """Optimal closed loop Z' = (A - S Pi(t)) Z on the Riccati time grid.

    For a decoupled solution the state is evaluated in closed form.  With
    q = (Pi - X) Z one has q' = -Ac' q and Z' = Ac Z - S q, which gives

        Z(t) = E(t) (Z0 + W E(tau)' q(tau)) - W q(t),  q(t) = E(tau - t)' q(tau).

    Dense RK4 solutions are integrated with RK4, taking Pi at half steps as
    the mean of the neighbouring snapshots.
    """
    z0 = np.asarray(z0, dtype=float)
    if not isinstance(riccati, DecoupledRiccatiSolution):
        return _closed_loop_rk4(system, riccati, z0)
    x, w = riccati.stationary, riccati.gramian
    cmap, e_tau = riccati.terminal_costate_map
    q_tau = cmap @ z0
    eh = riccati.step_propagator
    k = riccati.n_steps
    q = _power_orbit(eh.T, q_tau, k + 1)[::-1]
    start = z0 + w @ (e_tau.T @ q_tau)
    z = _power_orbit(eh, start, k + 1) - q @ w
    return _finish(riccati.times, z, q + z @ x, system.b_vector, riccati.gamma)


def _closed_loop_rk4(system, riccati, z0):
    a = system.a_matrix
    b = system.b_vector
    s_mat = np.outer(b, b) / riccati.gamma
    times = riccati.times
    pis = riccati.matrices
    z = np.empty((len(times), a.shape[0]))
    z[0] = z0
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(len(times) - 1):
            h = times[k + 1] - times[k]
            m0 = a - s_mat @ pis[k]
            m1 = a - s_mat @ pis[k + 1]
            mh = 0.5 * (m0 + m1)
            zk = z[k]
            k1 = m0 @ zk
            k2 = mh @ (zk + 0.5 * h * k1)
            k3 = mh @ (zk + 0.5 * h * k2)
            k4 = m1 @ (zk + h * k3)
            z[k + 1] = zk + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    p = np.einsum("kij,kj->ki", pis, z)
    return _finish(times, z, p, b, riccati.gamma)


def open_loop_sim(system, z0, tau, n_steps):
    """Uncontrolled response Z' = A Z, propagated with the exact step map."""
    times = _time_grid(tau, n_steps)
    z0 = np.asarray(z0, dtype=float)
    eh = sla.expm(system.a_matrix * (tau / n_steps))
    z = _power_orbit(eh, z0, len(times))
    n = z.shape[1] // 2
    return Trajectory(times, z, np.zeros(len(times)), np.zeros((len(times), n)))


def trajectory_cost(traj, system, gamma):
    """Trapezoidal quadrature of Z'QZ + gamma u^2 along a trajectory."""
    z = traj.state
    integrand = np.einsum("ki,ij,kj->k", z, system.q_matrix, z) + gamma * traj.control**2
    return float(np.trapezoid(integrand, traj.times))


def write_trajectory_csv(path, traj, stride=1):
    """Write ``t, u, a_1..a_N, adot_1..adot_N``, every ``stride``-th sample.

    The final sample is always included.
    """
    n = traj.n_modes
    idx = np.arange(0, len(traj.times), stride)
    if idx[-1] != len(traj.times) - 1:
        idx = np.append(idx, len(traj.times) - 1)
    header = (["t", "u"] + [f"a_{i}" for i in range(1, n + 1)]
              + [f"adot_{i}" for i in range(1, n + 1)])
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t, u, z in zip(traj.times[idx], traj.control[idx], traj.state[idx]):
            w.writerow([f"{t:.17g}", f"{u:.17g}"] + [f"{v:.17g}" for v in z])


def write_field_csv(path, times, values, x):
    """Rows are times, columns are positions; the first column is t."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t"] + [f"{xi:.17g}" for xi in x])
        for t, row in zip(times, values):
            w.writerow([f"{t:.17g}"] + [f"{v:.17g}" for v in row])

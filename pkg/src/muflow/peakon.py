"""Peakon and shock-peakon dynamics for the mu-family, with weak-form verification."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.integrate import simpson

from .densities import (
    G0,
    GreensFamily,
    greens_antideriv,
    greens_conv_deriv,
    greens_deriv,
    greens_eval,
    greens_selfconv,
)
from .errors import CollisionError, DegenerateQ
from .grid import PeriodicField, PeriodicGrid

COLLISION_TOL = 1e-10
COLLISION_STOP = 1e-6


@dataclass(frozen=True)
class PeakonState:
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = np.atleast_1d(np.asarray(self.q, dtype=float)).copy()
        p = np.atleast_1d(np.asarray(self.p, dtype=float)).copy()
        if q.shape != p.shape or q.ndim != 1 or len(q) < 1:
            raise ValueError("q and p must be nonempty vectors of equal length")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @property
    def size(self) -> int:
        return len(self.q)


@dataclass(frozen=True)
class ShockPeakonState:
    q: np.ndarray
    p: np.ndarray
    s: np.ndarray

    def __post_init__(self):
        arrs = [np.atleast_1d(np.asarray(a, dtype=float)).copy() for a in (self.q, self.p, self.s)]
        if len({a.shape for a in arrs}) != 1 or arrs[0].ndim != 1 or len(arrs[0]) < 1:
            raise ValueError("q, p and s must be nonempty vectors of equal length")
        for name, a in zip("qps", arrs):
            object.__setattr__(self, name, a)

    @property
    def size(self) -> int:
        return len(self.q)


def differences(q: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Pairwise q_i - q_j as (representative in (-1, 1), reduction to [0, 1)).

    The first form feeds G, the second g and g'.
    """
    w = np.mod(q, 1.0)
    d = w[:, None] - w[None, :]
    return d, np.mod(d, 1.0)


def _circular_gaps(q: np.ndarray) -> np.ndarray:
    if len(q) < 2:
        return np.array([np.inf])
    _, d = differences(q)
    gap = np.minimum(d, 1.0 - d)
    return gap[~np.eye(len(q), dtype=bool)]


def check_distinct(q: np.ndarray, tol: float = COLLISION_TOL):
    if np.min(_circular_gaps(q)) < tol:
        raise CollisionError("two peaks coincide")


def _check_lambda(lam: float):
    if lam in (0, 1):
        raise ValueError(f"lambda={lam:g} is excluded for peakons")


# ---- field reconstruction ----

def peakon_velocity(state: PeakonState | ShockPeakonState, family: GreensFamily = GreensFamily.MU) -> Callable:
    """Pointwise evaluator of u = sum p_j g(x - q_j) (+ s_j g'(x - q_j) for shocks)."""
    q, p = state.q, state.p
    s = getattr(state, "s", None)

    def u(x):
        x = np.asarray(x, dtype=float)
        d = x[..., None] - q
        out = greens_eval(family, d) @ p if d.ndim > 1 else float(np.dot(greens_eval(family, d), p))
        if s is not None:
            out = out + (greens_deriv(family, d) @ s if d.ndim > 1 else float(np.dot(greens_deriv(family, d), s)))
        return out

    return u


def reconstruct_u(state: PeakonState | ShockPeakonState, grid: PeriodicGrid,
                  family: GreensFamily = GreensFamily.MU) -> PeriodicField:
    return PeriodicField(grid, peakon_velocity(state, family)(grid.points))


def regularized_ux(state: PeakonState, i: int, family: GreensFamily = GreensFamily.MU) -> float:
    _, d = differences(state.q)
    return float(np.dot(greens_deriv(family, d[i]), state.p))


def one_peakon_profile(c: float) -> Callable:
    """Traveling one-peakon of speed c, periodic with its peak at x = +-1/2."""
    def phi(x):
        y = np.asarray(x, dtype=float)
        y = y - np.round(y)
        return c / 26.0 * (12.0 * y**2 + 23.0)

    return phi


# ---- dynamics ----

def peakon_rhs(state: PeakonState, lam: float, family: GreensFamily = GreensFamily.MU):
    _check_lambda(lam)
    check_distinct(state.q)
    _, d = differences(state.q)
    qdot = greens_eval(family, d) @ state.p
    pdot = -(lam - 1) * state.p * (greens_deriv(family, d) @ state.p)
    return qdot, pdot


def two_body_energy(state: PeakonState, family: GreensFamily = GreensFamily.MU) -> float:
    """h = 1/2 sum_ij p_i p_j g(q_i - q_j)."""
    _, d = differences(state.q)
    return 0.5 * float(state.p @ greens_eval(family, d) @ state.p)


def canonical_rhs(state: PeakonState, family: GreensFamily = GreensFamily.MU):
    """Hamilton's equations of h, with the gradient in q taken term by term."""
    check_distinct(state.q)
    _, d = differences(state.q)
    p = state.p
    gmat = greens_eval(family, d)
    dg = greens_deriv(family, d)
    dh_dp = gmat @ p
    # d/dq_i of g(q_a - q_b): +g' when a = i, -g' when b = i
    as_first = 0.5 * p * (dg @ p)
    as_second = -0.5 * p * (dg.T @ p)
    dh_dq = as_first + as_second
    return dh_dp, -dh_dq


@dataclass(frozen=True)
class PeakonTrajectory:
    times: np.ndarray
    q: np.ndarray  # wrapped to [0, 1)
    p: np.ndarray
    q_lift: np.ndarray  # continuous positions
    status: str  # "Completed" or "CollisionDetected"
    s: np.ndarray | None = None

    def state(self, i: int) -> PeakonState | ShockPeakonState:
        if self.s is None:
            return PeakonState(self.q[i], self.p[i])
        return ShockPeakonState(self.q[i], self.p[i], self.s[i])


def _rk4(rhs, y0: np.ndarray, t_end: float, dt: float, stop=None):
    if not (dt > 0 and t_end > 0):
        raise ValueError("dt and t_end must be positive")
    steps = int(np.ceil(t_end / dt - 1e-9))
    h = t_end / steps
    ys, ts = [y0.copy()], [0.0]
    y = y0.copy()
    status = "Completed"
    for k in range(steps):
        try:
            k1 = rhs(y)
            k2 = rhs(y + h / 2 * k1)
            k3 = rhs(y + h / 2 * k2)
            k4 = rhs(y + h * k3)
        except CollisionError:
            status = "CollisionDetected"
            break
        y = y + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        ys.append(y.copy())
        ts.append((k + 1) * h)
        if stop is not None and stop(y):
            status = "CollisionDetected"
            break
    return np.array(ts), np.array(ys), status


def integrate_peakons(state0: PeakonState, lam: float, family: GreensFamily = GreensFamily.MU,
                      t_end: float = 1.0, dt: float = 1e-3, rhs=None) -> PeakonTrajectory:
    """RK4 on (q, p).  `rhs` may replace peakon_rhs, e.g. for perturbed dynamics."""
    _check_lambda(lam)
    n = state0.size
    rhs = rhs or (lambda st: peakon_rhs(st, lam, family))

    def f(y):
        qd, pd = rhs(PeakonState(y[:n], y[n:]))
        return np.concatenate([qd, pd])

    def stop(y):
        return np.min(_circular_gaps(y[:n])) < COLLISION_STOP

    y0 = np.concatenate([state0.q, state0.p])
    ts, ys, status = _rk4(f, y0, t_end, dt, stop)
    return PeakonTrajectory(ts, np.mod(ys[:, :n], 1.0), ys[:, n:], ys[:, :n], status)


# ---- Poisson structure ----

@dataclass(frozen=True)
class BracketMatrices:
    pp: np.ndarray
    qp: np.ndarray
    qq: np.ndarray

    def full(self) -> np.ndarray:
        """Antisymmetric 2N x 2N matrix in the coordinates (q, p)."""
        return np.block([[self.qq, self.qp], [-self.qp.T, self.pp]])


def poisson_brackets(state: PeakonState, lam: float, family: GreensFamily = GreensFamily.MU) -> BracketMatrices:
    d_rep, d01 = differences(state.q)
    p = state.p
    pp = ((lam - 1) / lam) ** 2 * np.outer(p, p) * greens_deriv(family, d01)
    qp = -((lam - 1) / lam**2) * greens_eval(family, d01) * p[None, :]
    qq = -greens_antideriv(family, d_rep) / lam**2
    return BracketMatrices(pp, qp, qq)


def hamiltonian_flow_check(state: PeakonState, lam: float, family: GreensFamily = GreensFamily.MU) -> float:
    """Sup distance between the bracket flow of H0 = -(lam^2/(lam-1)) sum p and peakon_rhs."""
    if lam == 1:
        raise ValueError("lambda=1 not admissible for H0 normalization")
    n = state.size
    grad = np.concatenate([np.zeros(n), np.full(n, -lam**2 / (lam - 1))])
    flow = poisson_brackets(state, lam, family).full() @ grad
    qdot, pdot = peakon_rhs(state, lam, family)
    return float(np.max(np.abs(flow - np.concatenate([qdot, pdot]))))


# ---- two-peakon reduction for muCH ----

@dataclass(frozen=True)
class ReducedTwoPeakon:
    Q: float
    P: float
    h: float
    H0: float

    def __post_init__(self):
        if self.Q == 0 or not -1 < self.Q < 1:
            raise DegenerateQ("relative position must lie in (-1, 1) and be nonzero")

    @property
    def alpha(self) -> float:
        return 2 * self.h - G0 * self.H0**2 / 16.0

    @classmethod
    def from_state(cls, state: PeakonState) -> "ReducedTwoPeakon":
        if state.size != 2:
            raise ValueError("two peakons expected")
        d, _ = differences(state.q)
        h = two_body_energy(state)
        return cls(float(d[1, 0]), float(state.p[1] - state.p[0]), h, -4.0 * float(np.sum(state.p)))


def _reduced_field(Q: float, P: float, alpha: float):
    if Q == 0:
        raise DegenerateQ("Q = 0: the two peaks coincide")
    w = Q * Q - abs(Q)
    return -0.5 * P * w, -2.0 * alpha * (Q - 0.5 * np.sign(Q)) / w


def reduced_two_peakon_rhs(r: ReducedTwoPeakon) -> tuple[float, float]:
    return _reduced_field(r.Q, r.P, r.alpha)


def reduced_second_order_residual(Q: float, Qdot: float, Qddot: float, alpha: float) -> float:
    w = Q * Q - abs(Q)
    return Qddot * w - (2 * Qdot**2 + alpha * w) * (Q - 0.5 * np.sign(Q))


def integrate_reduced(r0: ReducedTwoPeakon, t_end: float, dt: float):
    """Integrate (Q, P); returns (times, Q, P).  Q is kept in (0, 1) or (-1, 0) by its sign."""
    alpha = r0.alpha

    def f(y):
        return np.array(_reduced_field(y[0], y[1], alpha))

    ts, ys, _ = _rk4(f, np.array([r0.Q, r0.P]), t_end, dt)
    return ts, ys[:, 0], ys[:, 1]


# ---- shock-peakons (lambda = 3) ----

def shock_rhs(state: ShockPeakonState):
    check_distinct(state.q)
    mu = GreensFamily.MU
    _, d = differences(state.q)
    g, dg = greens_eval(mu, d), greens_deriv(mu, d)
    p, s = state.p, state.s
    qdot = g @ p + dg @ s
    ux = dg @ p + np.sum(s)
    uxx = np.sum(p)
    pdot = 2 * (s * uxx - p * ux)
    sdot = -s * ux
    return qdot, pdot, sdot


def integrate_shock_peakons(state0: ShockPeakonState, t_end: float, dt: float, rhs=None) -> PeakonTrajectory:
    n = state0.size
    rhs = rhs or shock_rhs

    def f(y):
        return np.concatenate(rhs(ShockPeakonState(y[:n], y[n:2 * n], y[2 * n:])))

    def stop(y):
        return np.min(_circular_gaps(y[:n])) < COLLISION_STOP

    y0 = np.concatenate([state0.q, state0.p, state0.s])
    ts, ys, status = _rk4(f, y0, t_end, dt, stop)
    return PeakonTrajectory(ts, np.mod(ys[:, :n], 1.0), ys[:, n:2 * n], ys[:, :n], status, ys[:, 2 * n:])


# ---- weak form ----

@dataclass(frozen=True)
class SpaceTimeTest:
    """phi(t, x) = bump(t) * F(x), bump supported on (t0, t1) with peak 1, F a finite Fourier sum."""

    t0: float
    t1: float
    cos_coef: np.ndarray
    sin_coef: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def _tau(self, t):
        return (2 * np.asarray(t, dtype=float) - self.t0 - self.t1) / (self.t1 - self.t0)

    def bump(self, t) -> np.ndarray:
        tau = self._tau(t)
        inside = np.abs(tau) < 1
        out = np.zeros_like(tau)
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - tau[inside] ** 2))
        return out

    def bump_dt(self, t) -> np.ndarray:
        tau = self._tau(t)
        inside = np.abs(tau) < 1
        out = np.zeros_like(tau)
        ti = tau[inside]
        out[inside] = np.exp(1.0 - 1.0 / (1.0 - ti**2)) * (-2 * ti / (1 - ti**2) ** 2) * 2 / (self.t1 - self.t0)
        return out

    def space(self, x, derivative: int = 0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        out = np.zeros_like(x)
        for k, a in enumerate(self.cos_coef):
            w = 2 * np.pi * k
            out += a * (np.cos(w * x) if derivative == 0 else -w * np.sin(w * x))
        for k, b in enumerate(self.sin_coef, start=1):
            w = 2 * np.pi * k
            out += b * (np.sin(w * x) if derivative == 0 else w * np.cos(w * x))
        return out


def random_tests(rng: np.random.Generator, count: int, t_span: tuple[float, float], modes: int = 3) -> list[SpaceTimeTest]:
    """Seeded tests whose time windows cover at least half of t_span."""
    t_lo, t_hi = t_span
    length = t_hi - t_lo
    out = []
    for _ in range(count):
        width = rng.uniform(0.5, 1.0) * length
        start = t_lo + rng.uniform(0.0, length - width)
        out.append(SpaceTimeTest(start, start + width, rng.normal(size=modes + 1), rng.normal(size=modes)))
    return out


_WEAK_NODES, _WEAK_WEIGHTS = np.polynomial.legendre.leggauss(32)


def _space_nodes(q: np.ndarray):
    """Gauss-Legendre nodes on [0, 1) split at the peak positions."""
    cuts = np.unique(np.concatenate([[0.0, 1.0], np.mod(q, 1.0)]))
    lo, hi = cuts[:-1], cuts[1:]
    half = (hi - lo) / 2
    x = ((lo + hi) / 2)[:, None] + half[:, None] * _WEAK_NODES
    w = half[:, None] * _WEAK_WEIGHTS
    return x.ravel(), w.ravel()


def _weak_integrands(q, p, s, lam):
    """Nodes, weights, u, and the flux multiplying phi_x at one time."""
    mu = GreensFamily.MU
    x, w = _space_nodes(q)
    d = x[:, None] - q[None, :]
    g, dg = greens_eval(mu, d), greens_deriv(mu, d)
    K = greens_selfconv(d)
    C = greens_conv_deriv(d)
    u = g @ p
    g_u = K @ p
    mean_u = float(np.sum(p))
    if s is not None:
        u = u + dg @ s
        g_u = g_u + C @ s
    flux = 0.5 * u * u + lam * mean_u * g_u
    if lam != 3:
        # g * (u_x^2) with u_x^2 = sum_ij p_i p_j g'_i g'_j expanded through
        # g'_i g'_j = g_i + g_j + g'(q_i - q_j)(g'_i - g'_j) + g(q_i - q_j) - 3
        _, dq = differences(q)
        gq, dgq = greens_eval(mu, dq), greens_deriv(mu, dq)
        total = np.sum(p)
        conv = 2 * total * (K @ p) + 2 * (C @ (p * (dgq @ p))) + float(p @ gq @ p) - 3 * total**2
        flux = flux + 0.5 * (3 - lam) * conv
    return x, w, u, flux


def weak_form_residual(trajectory: PeakonTrajectory, lam: float, tests: list[SpaceTimeTest],
                       family: GreensFamily = GreensFamily.MU) -> np.ndarray:
    """Space-time pairing of the trajectory's u with each test function.

    Spatial integrals are exact up to Gauss-Legendre error on the pieces
    between peaks; convolutions use closed forms.  Time integration is
    composite Simpson over the trajectory samples.
    """
    if family is not GreensFamily.MU:
        raise ValueError("weak-form residual is implemented for the mu family")
    if trajectory.s is not None and lam != 3:
        raise ValueError("shock-peakons are defined for lambda = 3")
    times = trajectory.times
    a = np.zeros((len(tests), len(times)))  # int u F dx
    b = np.zeros((len(tests), len(times)))  # int flux F' dx
    for k in range(len(times)):
        s = None if trajectory.s is None else trajectory.s[k]
        x, w, u, flux = _weak_integrands(trajectory.q[k], trajectory.p[k], s, lam)
        space = np.array([t.space(x) for t in tests])
        space_x = np.array([t.space(x, 1) for t in tests])
        a[:, k] = space @ (w * u)
        b[:, k] = space_x @ (w * flux)
    out = np.empty(len(tests))
    for i, test in enumerate(tests):
        out[i] = simpson(test.bump_dt(times) * a[i] + test.bump(times) * b[i], x=times)
    return out

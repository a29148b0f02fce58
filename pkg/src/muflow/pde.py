"""Method-of-lines evolution of the mu-family and muBurgers on the circle.

Space is pseudospectral on a uniform grid, time is classical RK4.  Besides
the solver this module integrates the Lagrangian flow map of a recorded
run, monitors the transported-density law m(t, xi) (xi')^lam = m(0), and
handles blow-up prediction, detection and the global slope bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .densities import InertiaOperator, apply_A_values, inverse_mu_values
from .errors import FitFailed, HypothesisViolated, MeanNotZero, NotADiffeo, PreconditionError
from .grid import PeriodicField, PeriodicGrid, dealias_mask, derivative_multiplier, make_grid

INVARIANT_NAMES = ("mean", "H0", "H1", "H2", "ux_inf", "pointwise_dev")


@dataclass(frozen=True)
class FamilyConfig:
    lam: float = 3.0
    operator: InertiaOperator = InertiaOperator.MU_MINUS_DXX
    muburgers_gauge: float | Callable[[float], float] = 0.0

    def __post_init__(self):
        if self.operator is InertiaOperator.MINUS_DXX and self.lam != 3:
            raise ValueError("the -d^2 operator is only used with the muBurgers equation (lambda = 3)")

    @classmethod
    def mudp(cls) -> "FamilyConfig":
        return cls(3.0)

    @classmethod
    def much(cls) -> "FamilyConfig":
        return cls(2.0)

    @classmethod
    def muburgers(cls, gauge: float | Callable[[float], float] = 0.0) -> "FamilyConfig":
        return cls(3.0, InertiaOperator.MINUS_DXX, gauge)

    @property
    def is_muburgers(self) -> bool:
        return self.operator is InertiaOperator.MINUS_DXX

    def gauge(self, t: float) -> float:
        c = self.muburgers_gauge
        return float(c(t)) if callable(c) else float(c)


@dataclass(frozen=True)
class SolverParams:
    n: int
    dt: float
    t_end: float
    dealias: bool = False
    blowup_slope_threshold: float = 1e3
    record_every: int = 1
    adaptive: bool = False
    track_flow: bool = False

    def __post_init__(self):
        make_grid(self.n)
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.t_end > 0:
            raise ValueError("t_end must be positive")
        if self.record_every < 1:
            raise ValueError("record_every must be a positive integer")


@dataclass(frozen=True)
class Termination:
    kind: str  # "Completed", "BlowupDetected" or "NonFinite"
    time: float
    t_est: float | None = None

    def as_dict(self) -> dict:
        out = {"kind": self.kind, "time": self.time}
        if self.t_est is not None:
            out["t_est"] = self.t_est
        return out


@dataclass(frozen=True)
class SimulationRecord:
    config: FamilyConfig
    params: SolverParams
    grid: PeriodicGrid
    times: np.ndarray
    snapshots: np.ndarray  # (len(times), n)
    rates: np.ndarray  # u_t at each snapshot
    invariants: dict[str, np.ndarray]
    termination: Termination
    step_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    step_slopes: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def field(self, i: int) -> PeriodicField:
        return PeriodicField(self.grid, self.snapshots[i])

    def drift(self, name: str, relative: bool = False) -> float:
        series = self.invariants[name]
        d = float(np.max(np.abs(series - series[0])))
        if relative:
            d /= abs(float(series[0]))
        return d


# ---- right-hand sides ----

def _inverse_symbol_mu(n: int) -> np.ndarray:
    sym = (2 * np.pi * np.arange(n // 2 + 1)) ** 2
    sym[0] = 1.0
    return 1.0 / sym


def mu_family_rates(u: np.ndarray, lam: float, mask: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Return (u_t, u_x) for the weak-form lambda-family."""
    n = u.shape[-1]
    d1 = derivative_multiplier(n, 1)
    uh = np.fft.rfft(u)
    if mask is not None:
        uh = uh * mask
        u = np.fft.irfft(uh, n)
    ux = np.fft.irfft(d1 * uh, n)
    inner = lam * np.mean(u) * u + 0.5 * (3.0 - lam) * ux * ux
    rate_h = -np.fft.rfft(u * ux) - d1 * _inverse_symbol_mu(n) * np.fft.rfft(inner)
    if mask is not None:
        rate_h = rate_h * mask
    return np.fft.irfft(rate_h, n), ux


def muburgers_rates(u: np.ndarray, c: float, mask: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
    n = u.shape[-1]
    uh = np.fft.rfft(u)
    if mask is not None:
        uh = uh * mask
        u = np.fft.irfft(uh, n)
    ux = np.fft.irfft(derivative_multiplier(n, 1) * uh, n)
    rate = -u * ux
    if mask is not None:
        rate = np.fft.irfft(np.fft.rfft(rate) * mask, n)
    return rate + c, ux


def rhs_mu_family(u: PeriodicField, lam: float) -> PeriodicField:
    return PeriodicField(u.grid, mu_family_rates(u.values, lam)[0])


def rhs_muburgers(u: PeriodicField, c: float = 0.0) -> PeriodicField:
    return PeriodicField(u.grid, muburgers_rates(u.values, c)[0])


def _rates_function(config: FamilyConfig, n: int, dealias: bool):
    if config.operator is InertiaOperator.ONE_MINUS_DXX:
        raise ValueError("time stepping is implemented for the mu operator and muBurgers only")
    mask = dealias_mask(n) if dealias else None
    if config.is_muburgers:
        return lambda t, u: muburgers_rates(u, config.gauge(t), mask)
    lam = config.lam
    return lambda t, u: mu_family_rates(u, lam, mask)


# ---- invariants ----

def snapshot_invariants(u: np.ndarray, config: FamilyConfig) -> dict[str, float]:
    from .hamiltonian import quadrature_invariants

    return quadrature_invariants(u, config)


# ---- integration ----

def integrate(config: FamilyConfig, u0: PeriodicField, params: SolverParams) -> SimulationRecord:
    grid = u0.grid
    if grid.n != params.n:
        raise ValueError(f"initial data has n={grid.n}, params ask for n={params.n}")
    rates = _rates_function(config, grid.n, params.dealias)
    u = np.array(u0.values, dtype=float)
    if params.dealias:
        u = np.fft.irfft(np.fft.rfft(u) * dealias_mask(grid.n), grid.n)

    t = 0.0
    dt = params.dt
    k1, ux = rates(t, u)
    times, snaps, rate_rec = [t], [u.copy()], [k1.copy()]
    step_times, step_slopes = [t], [float(np.max(np.abs(ux)))]
    termination = None
    steps = 0
    while termination is None:
        if t >= params.t_end - 1e-12 * params.t_end:
            termination = Termination("Completed", t)
            break
        if params.adaptive:
            while dt * step_slopes[-1] > 0.2 and dt > 1e-9:
                dt /= 2
        h = min(dt, params.t_end - t)
        with np.errstate(all="ignore"):
            k2, _ = rates(t + h / 2, u + h / 2 * k1)
            k3, _ = rates(t + h / 2, u + h / 2 * k2)
            k4, _ = rates(t + h, u + h * k3)
            u = u + h / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t = t + h
            k1, ux = rates(t, u)
        steps += 1
        if not (np.all(np.isfinite(u)) and np.all(np.isfinite(k1))):
            termination = Termination("NonFinite", t)
            break
        slope = float(np.max(np.abs(ux)))
        step_times.append(t)
        step_slopes.append(slope)
        done = t >= params.t_end - 1e-12 * params.t_end
        blown = slope > params.blowup_slope_threshold
        if steps % params.record_every == 0 or done or blown:
            times.append(t)
            snaps.append(u.copy())
            rate_rec.append(k1.copy())
        if blown:
            termination = Termination("BlowupDetected", t)

    snapshots = np.array(snaps)
    invariants = {name: np.full(len(times), np.nan) for name in INVARIANT_NAMES}
    for i, s in enumerate(snapshots):
        for name, value in snapshot_invariants(s, config).items():
            invariants[name][i] = value
    record = SimulationRecord(
        config, params, grid, np.array(times), snapshots, np.array(rate_rec), invariants,
        termination, np.array(step_times), np.array(step_slopes),
    )
    if termination.kind == "BlowupDetected":
        try:
            t_est = detect_blowup(record)
        except FitFailed:
            t_est = None
        record = _replace(record, termination=Termination("BlowupDetected", termination.time, t_est))
    if params.track_flow and config.operator is not InertiaOperator.ONE_MINUS_DXX:
        try:
            flow = flow_map(record)
        except NotADiffeo:
            flow = None
        if flow is not None:
            invariants["pointwise_dev"] = pointwise_law_deviation(record, flow, config.lam)
    return record


def _replace(record: SimulationRecord, **changes) -> SimulationRecord:
    from dataclasses import replace

    return replace(record, **changes)


# ---- flow map ----

@dataclass(frozen=True)
class FlowMapState:
    xi: np.ndarray
    dxi: np.ndarray


@dataclass(frozen=True)
class FlowMap:
    """xi(t, x_j) and its x-derivative at the recorded times of a run."""

    times: np.ndarray
    xi: np.ndarray
    dxi: np.ndarray

    def state(self, i: int) -> FlowMapState:
        return FlowMapState(self.xi[i], self.dxi[i])

    def __len__(self):
        return len(self.times)


class _Evaluator:
    """u and u_x at arbitrary points from grid samples."""

    def __init__(self, n: int):
        self.n = n
        self.k = np.arange(n // 2 + 1)
        self.weights = np.full(n // 2 + 1, 2.0 / n)
        self.weights[0] = self.weights[-1] = 1.0 / n
        self.d1 = derivative_multiplier(n, 1)

    def __call__(self, u: np.ndarray, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        c = np.fft.rfft(u) * self.weights
        z = np.exp(2j * np.pi * points)[:, None]
        powers = np.empty((len(points), len(self.k)), dtype=complex)
        powers[:, 0] = 1.0
        powers[:, 1:] = z
        np.cumprod(powers[:, 1:], axis=1, out=powers[:, 1:])
        values = powers @ np.stack([c, c * self.d1], axis=1)
        return values[:, 0].real, values[:, 1].real


def flow_map(record: SimulationRecord) -> FlowMap:
    """Integrate xi' = u(t, xi), (d_x xi)' = u_x(t, xi) d_x xi from the identity.

    Each interval between consecutive snapshots is one RK4 step; u at the
    half step comes from cubic Hermite interpolation using the stored u_t,
    which keeps the scheme fourth order in time.
    """
    n = record.grid.n
    evaluate = _Evaluator(n)
    x = record.grid.points
    xi = x.copy()
    dxi = np.ones(n)
    out_xi, out_dxi = [xi.copy()], [dxi.copy()]

    def velocity(u, y, dy):
        v, vx = evaluate(u, y)
        return v, vx * dy

    for i in range(len(record.times) - 1):
        h = record.times[i + 1] - record.times[i]
        u0, u1 = record.snapshots[i], record.snapshots[i + 1]
        r0, r1 = record.rates[i], record.rates[i + 1]
        umid = 0.5 * (u0 + u1) + h / 8 * (r0 - r1)
        a1, b1 = velocity(u0, xi, dxi)
        a2, b2 = velocity(umid, xi + h / 2 * a1, dxi + h / 2 * b1)
        a3, b3 = velocity(umid, xi + h / 2 * a2, dxi + h / 2 * b2)
        a4, b4 = velocity(u1, xi + h * a3, dxi + h * b3)
        xi = xi + h / 6 * (a1 + 2 * a2 + 2 * a3 + a4)
        dxi = dxi + h / 6 * (b1 + 2 * b2 + 2 * b3 + b4)
        if np.any(dxi <= 0):
            raise NotADiffeo(f"flow map loses monotonicity at t={record.times[i + 1]:.6g}")
        out_xi.append(xi.copy())
        out_dxi.append(dxi.copy())
    return FlowMap(record.times.copy(), np.array(out_xi), np.array(out_dxi))


def pointwise_law_deviation(record: SimulationRecord, flow: FlowMap, lam: float) -> np.ndarray:
    """max_x |m(t, xi(t,x)) (d_x xi)^lam - m(0, x)| at each recorded time."""
    op = record.config.operator
    if op is InertiaOperator.ONE_MINUS_DXX:
        raise ValueError("pointwise law is monitored for the mu and muBurgers operators")
    evaluate = _Evaluator(record.grid.n)
    m0 = apply_A_values(op, record.snapshots[0])
    out = np.empty(len(flow.times))
    for i in range(len(flow.times)):
        m = apply_A_values(op, record.snapshots[i])
        m_xi, _ = evaluate(m, flow.xi[i])
        out[i] = np.max(np.abs(m_xi * flow.dxi[i] ** lam - m0))
    return out


# ---- blow-up ----

def predict_blowup_time(u0: PeriodicField) -> float:
    mu = float(np.mean(u0.values))
    if abs(mu) > 1e-10 * u0.sup():
        raise MeanNotZero(f"blow-up prediction needs zero-mean data, mean is {mu:.3e}")
    slope = float(np.min(np.fft.irfft(np.fft.rfft(u0.values) * derivative_multiplier(u0.grid.n, 1), u0.grid.n)))
    if slope >= 0:
        return math.inf
    return -1.0 / slope


def detect_blowup(record: SimulationRecord) -> float:
    """Extrapolate 1/||u_x|| linearly to zero over the resolved end of the run.

    Along the steepening characteristic 1/||u_x|| decreases like (T - t).
    Samples count as resolved until the front, of height about the range of
    u0, becomes narrower than 16 grid cells; the fit uses the second half of
    that stretch measured in 1/||u_x||.
    """
    if record.termination.kind != "BlowupDetected":
        raise PreconditionError("detect_blowup needs a run that terminated by blow-up")
    t = record.step_times
    s = record.step_slopes
    u0 = record.snapshots[0]
    hi = (np.max(u0) - np.min(u0)) * record.grid.n / 16.0
    over = np.flatnonzero(s > hi)
    end = over[0] if len(over) else len(s)
    r = 1.0 / s[:end]
    if len(r) < 3:
        raise FitFailed("too few resolved samples before blow-up")
    window = r <= r[-1] + 0.5 * (r[0] - r[-1])
    rr, tt = r[window], t[:end][window]
    if len(rr) < 3 or np.any(np.diff(rr) >= 0):
        raise FitFailed("reciprocal slope is not decreasing over the fit window")
    slope, intercept = np.polyfit(tt, rr, 1)
    if slope >= 0:
        raise FitFailed("reciprocal slope does not extrapolate to zero")
    return float(-intercept / slope)


# ---- global bound ----

def global_bound_monitor(record: SimulationRecord, C: float = 2.0, tol_sign: float = 1e-10) -> tuple[bool, float]:
    """Check m >= 0 persists and ||u_x|| <= C mu(u0) along the run.

    Returns (ok, margin) with margin = min over snapshots of C mu(u0) - ||u_x||.
    """
    op = InertiaOperator.MU_MINUS_DXX
    m0 = apply_A_values(op, record.snapshots[0])
    mu0 = float(np.mean(record.snapshots[0]))
    scale = max(1.0, float(np.max(np.abs(m0))))
    if np.min(m0) < -tol_sign * scale or mu0 == 0.0:
        raise HypothesisViolated("initial momentum must be nonnegative with nonzero mean")
    m = apply_A_values(op, record.snapshots)
    n = record.grid.n
    ux = np.fft.irfft(np.fft.rfft(record.snapshots, axis=-1) * derivative_multiplier(n, 1), n, axis=-1)
    slopes = np.max(np.abs(ux), axis=-1)
    margin = float(np.min(C * mu0 - slopes))
    ok = bool(np.min(m) >= -tol_sign * scale and margin >= 0)
    return ok, margin


def initial_from_momentum(m0: PeriodicField) -> PeriodicField:
    return PeriodicField(m0.grid, inverse_mu_values(m0.values))

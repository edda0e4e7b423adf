"""Time stepping of the regularised curve/actin system.

Each curve node ``i`` carries an actin column ``a[i, j]`` on the z-grid of
the standing-wave profile.  One step:

1. curvature ``kappa_i`` from the periodic stencils and
   ``Phi_i = sum_j a[i, j] theta_0'(z_j)^2 dz``;
2. ``lam = (1/|Gamma|) * integral of (kappa + Phi) ds`` (trapezoid on the
   uniform curve parameter);
3. ``V_i = kappa_i + Phi_i - lam`` and an explicit move along the inward
   normal, ``p_i += V_i nu_i dt``;
4. correction of ``lam`` until the enclosed area matches the initial area;
5. backward Euler for every column,
   ``(eps/dt)(a' - a) = a'_zz + V_i a'_z - a' - beta theta_0'``,
   with Dirichlet zeros at ``z = +-L``;
6. periodic equal-arclength resampling, carrying the columns along.
"""
from __future__ import annotations

import dataclasses
import json
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np
from numba import njit

from ._csv import fmt
from .errors import AreaLoopDiverged, DegenerateTangent, SingularSystem
from .geometry import (
    DiscreteCurve,
    centroid,
    curvature,
    d1,
    d2,
    inward_normals,
    isoperimetric_quotient,
    length,
    resample_points,
    self_intersects,
    shoelace_area,
    total_turning,
)
from .nonlinearity import solve_psi_many
from .potential import StandingWaveProfile
from .tridiag import thomas_solve  # noqa: F401  (re-exported: the actin solver)

log = logging.getLogger(__name__)


@dataclass
class SimConfig:
    """Run parameters.  ``dt = None`` means ``dt_ratio * h^2`` with ``h = 1/N``."""

    epsilon: float = 0.01
    beta: float = 100.0
    well: str = "asym150"
    N: int = 128
    M: int = 400
    L: float = 20.0
    dt: float | None = None
    dt_ratio: float = 1e-3
    err: float = 1e-8
    max_area_iters: int = 50
    area_damping: float = 1.0
    area_update: str = "newton"  # or "additive": lam += damping * dA
    resample_every: int = 50
    t_end: float = 1.0
    output_every: int = 100
    snapshot_every: int = 0
    trace_nodes: tuple = (0,)
    jump_threshold: float = 0.5
    check_intersections: bool = True

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if not self.err > 0:
            raise ValueError("err must be positive")
        if int(self.N) < 8 or int(self.M) < 16 or int(self.M) % 2:
            raise ValueError("need N >= 8 and an even M >= 16")
        if self.area_update not in ("newton", "additive"):
            raise ValueError("area_update must be 'newton' or 'additive'")
        if self.output_every < 1:
            raise ValueError("output_every must be >= 1")
        self.trace_nodes = tuple(int(i) for i in self.trace_nodes)

    @property
    def h(self) -> float:
        return 1.0 / self.N

    @property
    def time_step(self) -> float:
        return float(self.dt) if self.dt is not None else self.dt_ratio * self.h**2

    @property
    def ratio(self) -> float:
        return self.time_step / self.h**2

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["trace_nodes"] = list(self.trace_nodes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "SimConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass
class SimulationState:
    points: np.ndarray  # (N, 2), counterclockwise
    actin: np.ndarray  # (N, M + 1), zero first/last column
    t: float
    lam: float
    area0: float
    step: int = 0
    velocity: np.ndarray | None = None  # last accepted V_i
    phi: np.ndarray | None = None  # last Phi_i
    flags: dict = field(default_factory=dict)

    @property
    def curve(self) -> DiscreteCurve:
        return DiscreteCurve(self.points)

    def copy(self) -> "SimulationState":
        return dataclasses.replace(
            self, points=self.points.copy(), actin=self.actin.copy(),
            velocity=None if self.velocity is None else self.velocity.copy(),
            phi=None if self.phi is None else self.phi.copy(), flags=dict(self.flags))


@dataclass
class DiagnosticsRecord:
    t: float
    step: int
    Q: float
    cx: float
    cy: float
    area: float
    lam: float
    iters: int
    V: dict = field(default_factory=dict)  # traced node -> V_i
    phi: dict = field(default_factory=dict)  # traced node -> Phi_i
    self_intersecting: bool = False


class Regime(str, Enum):
    STATIONARY = "Stationary"
    ROTATING = "Rotating"
    WANDERING = "Wandering"
    INCONCLUSIVE = "Inconclusive"


# ---------------------------------------------------------------- actin

@njit(cache=True)
def _actin_backward_euler(aT, V, forcing, dz, rho):
    """Backward-Euler solve for all columns at once.

    ``aT`` is the transposed field, shape ``(M + 1, N)``, so the inner loop
    runs over independent curve nodes.  ``rho = eps / dt``.  Returns
    ``(new_aT, bad_node)`` with ``bad_node = -1`` on success.
    """
    m1, nrow = aT.shape
    n = m1 - 2
    out = np.zeros_like(aT)
    cp = np.empty((n, nrow))
    dp = np.empty((n, nrow))
    inv2 = 1.0 / (dz * dz)
    diag = 2.0 * inv2 + 1.0 + rho
    lo = np.empty(nrow)
    up = np.empty(nrow)
    for r in range(nrow):
        adv = V[r] / (2.0 * dz)
        lo[r] = -inv2 + adv
        up[r] = -inv2 - adv
        cp[0, r] = up[r] / diag
        dp[0, r] = (rho * aT[1, r] - forcing[0]) / diag
    for k in range(1, n):
        fk = forcing[k]
        for r in range(nrow):
            piv = diag - lo[r] * cp[k - 1, r]
            if piv == 0.0 or not np.isfinite(piv):
                return out, r
            inv = 1.0 / piv
            cp[k, r] = up[r] * inv
            dp[k, r] = (rho * aT[k + 1, r] - fk - lo[r] * dp[k - 1, r]) * inv
    for r in range(nrow):
        out[n, r] = dp[n - 1, r]
    for k in range(n - 2, -1, -1):
        for r in range(nrow):
            out[k + 1, r] = dp[k, r] - cp[k, r] * out[k + 2, r]
    return out, -1


def actin_update(actin, V, profile: StandingWaveProfile, beta: float, epsilon: float, dt: float):
    """One backward-Euler step for all columns (``V`` lagged, so the system is linear).

    Returns an ``(N, M + 1)`` array in Fortran order (its transpose is the
    contiguous working layout of the solver).
    """
    dz = profile.dz
    V = np.ascontiguousarray(V, dtype=float)
    if np.any(np.abs(V) * dz >= 2.0):
        raise SingularSystem("|V| dz >= 2: centred advection loses diagonal dominance")
    forcing = beta * np.ascontiguousarray(profile.dtheta[1:-1], dtype=float)
    aT = np.ascontiguousarray(np.asarray(actin, dtype=float).T)
    new, bad = _actin_backward_euler(aT, V, forcing, dz, epsilon / dt)
    if bad >= 0:
        raise SingularSystem(f"zero pivot in actin column {bad}")
    return new.T


def carry_columns(old_points, new_points, actin):
    """Move nodal columns to resampled nodes by 4-point Lagrange interpolation in arc length.

    ``new_points`` must come from :func:`resample_points` applied to
    ``old_points`` (node 0 is kept in place and the order is preserved).
    """
    n = len(old_points)
    seg = np.hypot(*(np.roll(old_points, -1, 0) - old_points).T)
    s = np.concatenate(([0.0], np.cumsum(seg)))
    total = s[-1]
    # arc-length position of each new node: project onto the old polygon
    nseg = np.hypot(*(np.roll(new_points, -1, 0) - new_points).T)
    target = np.concatenate(([0.0], np.cumsum(nseg)[:-1])) * (total / nseg.sum())
    k = np.clip(np.searchsorted(s, target, side="right") - 1, 0, n - 1)
    idx = (k[:, None] + np.arange(-1, 3)[None, :])
    ext = np.concatenate((s[-2:-1] - total, s, s[1:3] + total))  # ext[m + 1] = s[m]
    nodes = ext[idx + 1]
    w = np.ones((len(target), 4))
    for a in range(4):
        for b in range(4):
            if a != b:
                w[:, a] *= (target - nodes[:, b]) / (nodes[:, a] - nodes[:, b])
    cols = actin[idx % n]  # (n_new, 4, M + 1)
    out = np.einsum("na,nam->nm", w, cols)
    return np.asfortranarray(out)


def phi_nodes(actin, profile: StandingWaveProfile) -> np.ndarray:
    return actin[:, 1:-1] @ np.asarray(profile.weight[1:-1]) * profile.dz


# ------------------------------------------------------------ init/step

def _lambda(kappa, phi, points):
    dp = d1(points)
    ds = np.hypot(dp[:, 0], dp[:, 1])
    return float(np.dot(kappa + phi, ds) / ds.sum())


def init_state(curve, profile: StandingWaveProfile, config: SimConfig, tw_velocity=None) -> SimulationState:
    """Initial state with each actin column at its stationary profile.

    ``tw_velocity`` is the rigid translation velocity of a traveling wave:
    a scalar means motion in +y, or give a 2-vector.  The stationary column
    for node ``i`` uses the normal velocity ``V_i = tw_velocity . nu_i``;
    without ``tw_velocity`` every column uses ``V_i = 0``.
    """
    pts = curve.points if isinstance(curve, DiscreteCurve) else DiscreteCurve(curve).points
    pts = np.array(pts, dtype=float)
    if profile.M != config.M or not math.isclose(profile.L, config.L):
        raise ValueError("profile grid does not match config (M, L)")
    nu = inward_normals(pts)
    if tw_velocity is None:
        Vn = np.zeros(len(pts))
    else:
        vel = np.array([0.0, float(tw_velocity)]) if np.ndim(tw_velocity) == 0 else np.asarray(tw_velocity, float)
        Vn = nu @ vel
    if config.beta == 0.0:
        actin = np.zeros((len(pts), profile.M + 1), order="F")
    else:
        actin = np.asfortranarray(solve_psi_many(profile, Vn, config.beta))
    kappa = curvature(pts)
    phi = phi_nodes(actin, profile)
    lam = _lambda(kappa, phi, pts)
    ratio = config.ratio
    if ratio > 1e-2:
        log.warning("dt/h^2 = %.3g exceeds 1e-2", ratio)
    return SimulationState(pts, actin, 0.0, lam, shoelace_area(pts), 0, kappa + phi - lam, phi)


def _move(points, nu, V, dt):
    return points + (V * dt)[:, None] * nu


def curve_step(points, phi, area0, config: SimConfig):
    """Curve half of a step: returns ``(new_points, V, lam, iters)``."""
    dt = config.time_step
    dp = d1(points)
    ddp = d2(points)
    speed = np.hypot(dp[:, 0], dp[:, 1])
    if np.any(speed == 0.0):
        raise DegenerateTangent("zero tangent at a node")
    kappa = (dp[:, 0] * ddp[:, 1] - dp[:, 1] * ddp[:, 0]) / speed**3
    nu = np.column_stack((-dp[:, 1], dp[:, 0])) / speed[:, None]
    lam = float(np.dot(kappa + phi, speed) / speed.sum())
    base = kappa + phi
    new = _move(points, nu, base - lam, dt)
    dA = (shoelace_area(new) - area0) / area0
    iters = 0
    ell = float(speed.sum()) / len(points)
    while abs(dA) > config.err:
        if iters >= config.max_area_iters:
            raise AreaLoopDiverged(f"|dA| = {abs(dA):.3e} after {iters} corrections")
        if config.area_update == "newton":
            # d(area)/d(lam) = |Gamma| dt to first order
            lam -= config.area_damping * dA * area0 / (ell * dt)
        else:
            lam += config.area_damping * dA
        new = _move(points, nu, base - lam, dt)
        dA = (shoelace_area(new) - area0) / area0
        iters += 1
    return new, base - lam, lam, iters


def step(state: SimulationState, config: SimConfig, profile: StandingWaveProfile):
    """Advance one time step; returns ``(new_state, DiagnosticsRecord)``."""
    new, iters = _advance(state, config, profile)
    return new, record(new, config, iters)


def _advance(state, config, profile):
    phi = phi_nodes(state.actin, profile)
    new_pts, V, lam, iters = curve_step(state.points, phi, state.area0, config)
    dt = config.time_step
    actin = actin_update(state.actin, V, profile, config.beta, config.epsilon, dt)
    n = state.step + 1
    flags = dict(state.flags)
    if config.resample_every and n % config.resample_every == 0:
        moved = resample_points(new_pts, len(new_pts), preserve_area=True)
        actin = carry_columns(new_pts, moved, actin)
        actin[:, 0] = 0.0
        actin[:, -1] = 0.0
        new_pts = moved
        if config.check_intersections and self_intersects(new_pts):
            flags["self_intersection"] = True
            flags.setdefault("first_self_intersection_t", state.t + dt)
    # n * dt rather than a running sum keeps the time column free of drift
    new = SimulationState(new_pts, actin, n * dt, lam, state.area0, n, V, phi, flags)
    return new, iters


def record(state: SimulationState, config: SimConfig, iters: int = 0) -> DiagnosticsRecord:
    pts = state.points
    c = centroid(pts)
    V = {} if state.velocity is None else {i: float(state.velocity[i % len(pts)]) for i in config.trace_nodes}
    ph = {} if state.phi is None else {i: float(state.phi[i % len(pts)]) for i in config.trace_nodes}
    return DiagnosticsRecord(state.t, state.step, isoperimetric_quotient(pts), float(c[0]), float(c[1]),
                             shoelace_area(pts), state.lam, iters, V, ph,
                             bool(state.flags.get("self_intersection", False)))


# -------------------------------------------------------------- run

class MemorySink:
    def __init__(self):
        self.records: list[DiagnosticsRecord] = []
        self.snapshots: dict[int, np.ndarray] = {}

    def on_record(self, rec):
        self.records.append(rec)

    def on_snapshot(self, step_no, points):
        self.snapshots[step_no] = np.array(points)

    def close(self):
        pass


class CsvSink:
    """Streams ``diag.csv``, ``trace_<i>.csv`` and ``curve_<step>.csv`` into ``outdir``."""

    def __init__(self, outdir, trace_nodes=(0,)):
        self.outdir = Path(outdir)
        self.outdir.mkdir(parents=True, exist_ok=True)
        self._diag = open(self.outdir / "diag.csv", "w", newline="")
        self._diag.write("t,Q,area,lambda,cx,cy,iters\n")
        self._traces = {}
        for i in trace_nodes:
            fh = open(self.outdir / f"trace_{i}.csv", "w", newline="")
            fh.write("t,V,V_minus_phi\n")
            self._traces[i] = fh

    def on_record(self, r):
        self._diag.write(",".join([fmt(r.t), fmt(r.Q), fmt(r.area), fmt(r.lam), fmt(r.cx), fmt(r.cy),
                                   str(int(r.iters))]) + "\n")
        for i, fh in self._traces.items():
            if i in r.V:
                fh.write(f"{fmt(r.t)},{fmt(r.V[i])},{fmt(r.V[i] - r.phi[i])}\n")

    def on_snapshot(self, step_no, points):
        from ._csv import write_columns

        write_columns(self.outdir / f"curve_{step_no:08d}.csv", ["x", "y"], [points[:, 0], points[:, 1]])

    def flush(self):
        self._diag.flush()
        for fh in self._traces.values():
            fh.flush()

    def close(self):
        self._diag.close()
        for fh in self._traces.values():
            fh.close()


def run(state: SimulationState, config: SimConfig, profile: StandingWaveProfile, sinks=()):
    """Step until ``config.t_end``; returns ``(final_state, records)``.

    Records are emitted for the initial state and every ``output_every``
    steps (plus the last step).  On a step error the sinks are flushed and
    the exception is re-raised with ``last_state`` attached.
    """
    sinks = list(sinks)
    mem = MemorySink()
    sinks.append(mem)
    rec0 = record(state, config)
    for s in sinks:
        s.on_record(rec0)
    if config.snapshot_every:
        for s in sinks:
            s.on_snapshot(state.step, state.points)
    dt = config.time_step
    n_steps = int(math.floor(config.t_end / dt + 1e-9)) if config.t_end > 0 else 0
    try:
        for k in range(n_steps):
            state, iters = _advance(state, config, profile)
            last = k == n_steps - 1
            if state.step % config.output_every == 0 or last:
                rec = record(state, config, iters)
                for s in sinks:
                    s.on_record(rec)
            if config.snapshot_every and (state.step % config.snapshot_every == 0 or last):
                for s in sinks:
                    s.on_snapshot(state.step, state.points)
    except Exception as exc:
        exc.last_state = state
        raise
    finally:
        for s in sinks:
            if hasattr(s, "flush"):
                s.flush()
    return state, mem.records


# ------------------------------------------------------- diagnostics

def series_arrays(records):
    t = np.array([r.t for r in records])
    Q = np.array([r.Q for r in records])
    c = np.array([[r.cx, r.cy] for r in records])
    return t, Q, c


def q_oscillation(t, Q, skip: float = 0.5, min_peak: float = 0.3):
    """``(period, amplitude)`` of the Q signal after discarding the first ``skip`` fraction.

    The period is the lag of the first autocorrelation maximum after the
    first zero crossing; ``None`` when that peak is below ``min_peak``.
    """
    k0 = int(len(Q) * skip)
    q = np.asarray(Q[k0:], dtype=float)
    tt = np.asarray(t[k0:], dtype=float)
    amp = 0.5 * float(np.ptp(q)) if len(q) else 0.0
    if len(q) < 8:
        return None, amp
    x = q - q.mean()
    if not np.any(x):
        return None, amp
    ac = np.correlate(x, x, mode="full")[len(x) - 1:]
    ac = ac / ac[0]
    neg = np.nonzero(ac < 0)[0]
    if neg.size == 0:
        return None, amp
    rest = ac[neg[0]:]
    j = int(np.argmax(rest[: max(len(rest) * 2 // 3, 1)])) + neg[0]
    if ac[j] < min_peak:
        return None, amp
    dt = (tt[-1] - tt[0]) / (len(tt) - 1)
    return float(j * dt), amp


def classify_regime(records, diameter: float, stationary_disp: float = 0.05, q_flat: float = 1e-4,
                    rotating_disp: float = 1.0, wandering_disp: float = 2.0, min_peak: float = 0.3) -> Regime:
    """Stationary / Rotating / Wandering from centroid motion and Q oscillation.

    Displacements are in units of ``diameter``; thresholds are keyword
    arguments.  Returns ``Regime.INCONCLUSIVE`` when no rule fires.
    """
    t, Q, c = series_arrays(records)
    disp = np.hypot(*(c - c[0]).T) / diameter
    net = float(disp[-1])
    far = float(disp.max())
    if far > wandering_disp:
        return Regime.WANDERING
    if net < stationary_disp and float(np.ptp(Q)) < q_flat:
        return Regime.STATIONARY
    if far < rotating_disp:
        period, _ = q_oscillation(t, Q, min_peak=min_peak)
        if period is not None:
            return Regime.ROTATING
    return Regime.INCONCLUSIVE


def hysteresis_trace(records, node: int, threshold: float):
    """``(t, V, V - Phi)`` arrays for ``node`` and indices of jump events.

    A jump is flagged between consecutive outputs whose ``|dV|`` exceeds
    ``threshold``.
    """
    rows = [(r.t, r.V[node], r.V[node] - r.phi[node]) for r in records if node in r.V]
    if not rows:
        raise ValueError(f"node {node} was not traced")
    arr = np.array(rows)
    jumps = np.nonzero(np.abs(np.diff(arr[:, 1])) > threshold)[0] + 1
    return arr[:, 0], arr[:, 1], arr[:, 2], jumps


def stability_indicator(phi, V, c0: float):
    """True where ``Phi'(V) < c0`` (a stable velocity)."""
    return np.asarray(phi.prime(V)) < c0


__all__ = [
    "SimConfig", "SimulationState", "DiagnosticsRecord", "Regime", "init_state", "step", "run",
    "curve_step", "actin_update", "phi_nodes", "thomas_solve", "classify_regime", "hysteresis_trace",
    "stability_indicator", "q_oscillation", "series_arrays", "CsvSink", "MemorySink", "total_turning",
]

"""The velocity nonlinearity Phi_beta.

``Phi_beta(V) = int psi(z; V) theta_0'(z)^2 dz`` where ``psi`` solves

    psi'' + V psi' - psi = beta theta_0',   psi(+-inf) = 0.

On the truncated grid of a :class:`StandingWaveProfile` the problem is
discretised with centred differences and solved by the Thomas algorithm.
A closed-form toy nonlinearity and a user-supplied table are also provided;
all three share the :class:`PhiFunction` interface.
"""
from __future__ import annotations

import numpy as np
from scipy.interpolate import CubicSpline

from ._csv import read_columns, write_columns
from .errors import BracketFailure, SingularSystem
from .potential import StandingWaveProfile
from .tridiag import thomas_solve, thomas_solve_rows

FD_STEP = 1e-4
DEFAULT_V_MAX = 10.0
DEFAULT_DV = 0.01


def _psi_coefficients(dz: float, V):
    V = np.asarray(V, dtype=float)
    if np.any(np.abs(V) * dz >= 2.0):
        raise SingularSystem(
            f"|V| dz must stay below 2 for the centred scheme (|V|max={np.max(np.abs(V))!r}, dz={dz!r})"
        )
    inv2 = 1.0 / dz**2
    adv = V / (2.0 * dz)
    return inv2 - adv, -2.0 * inv2 - 1.0, inv2 + adv


def solve_psi(profile: StandingWaveProfile, V: float, beta: float) -> np.ndarray:
    """psi on the full z-grid (boundary values are the Dirichlet zeros)."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    n = profile.M - 1
    lo, d, up = _psi_coefficients(profile.dz, V)
    rhs = beta * np.asarray(profile.dtheta[1:-1])
    psi = np.zeros(profile.M + 1)
    psi[1:-1] = thomas_solve(np.full(n, lo), np.full(n, d), np.full(n, up), rhs)
    return psi


def solve_psi_many(profile: StandingWaveProfile, Vs, beta: float) -> np.ndarray:
    """Rows of psi, one per velocity in ``Vs``."""
    Vs = np.atleast_1d(np.asarray(Vs, dtype=float))
    n = profile.M - 1
    lo, d, up = _psi_coefficients(profile.dz, Vs)
    shape = (Vs.size, n)
    lower = np.broadcast_to(lo[:, None], shape)
    upper = np.broadcast_to(up[:, None], shape)
    diag = np.full(shape, d)
    rhs = np.broadcast_to(beta * np.asarray(profile.dtheta[1:-1]), shape)
    out = np.zeros((Vs.size, profile.M + 1))
    out[:, 1:-1] = thomas_solve_rows(lower, diag, upper, rhs)
    return out


def phi_direct(profile: StandingWaveProfile, V, beta: float):
    """Phi by solving the psi problem at each requested V (no table)."""
    V = np.asarray(V, dtype=float)
    psi = solve_psi_many(profile, V.ravel(), beta)
    # psi vanishes at both ends, so the trapezoid sum is the plain interior sum
    vals = psi[:, 1:-1] @ np.asarray(profile.weight[1:-1]) * profile.dz
    return vals.reshape(V.shape) if V.ndim else float(vals[0])


class PhiFunction:
    """Callable ``Phi_beta`` with derivative; subclasses fill in the physics."""

    kind = "abstract"
    beta = 0.0

    def __call__(self, V):
        raise NotImplementedError

    def prime(self, V):
        raise NotImplementedError

    @property
    def v_range(self) -> tuple[float, float]:
        return (-DEFAULT_V_MAX, DEFAULT_V_MAX)

    def table(self, dv: float = DEFAULT_DV):
        lo, hi = self.v_range
        Vs = np.linspace(lo, hi, int(round((hi - lo) / dv)) + 1)
        return Vs, np.asarray(self(Vs), dtype=float), np.asarray(self.prime(Vs), dtype=float)

    def sup_norm(self) -> float:
        """max |Phi| over the sampled velocity range."""
        _, vals, _ = self.table()
        return float(np.max(np.abs(vals)))

    def is_even(self, tol: float = 1e-8) -> bool:
        Vs, vals, _ = self.table()
        return bool(np.max(np.abs(vals - vals[::-1])) <= tol)

    def to_csv(self, path, dv: float = DEFAULT_DV):
        Vs, vals, dvals = self.table(dv)
        return write_columns(path, ["V", "phi", "phi_prime"], [Vs, vals, dvals])

    def describe(self) -> dict:
        return {"kind": self.kind, "beta": self.beta}


class ToyPhi(PhiFunction):
    """``-beta (1 - tanh V) exp(-V^2)``."""

    kind = "toy"

    def __init__(self, beta: float):
        if beta < 0:
            raise ValueError("beta must be non-negative")
        self.beta = float(beta)

    def __call__(self, V):
        V = np.asarray(V, dtype=float)
        out = -self.beta * (1.0 - np.tanh(V)) * np.exp(-V * V)
        return out if out.ndim else float(out)

    def prime(self, V):
        V = np.asarray(V, dtype=float)
        sech2 = 1.0 / np.cosh(V) ** 2
        out = self.beta * np.exp(-V * V) * (sech2 + 2.0 * V * (1.0 - np.tanh(V)))
        return out if out.ndim else float(out)


class _SplinePhi(PhiFunction):
    def _build(self, Vs, vals):
        self._Vs = np.asarray(Vs, dtype=float)
        self._vals = np.asarray(vals, dtype=float)
        self._spline = CubicSpline(self._Vs, self._vals)

    @property
    def v_range(self):
        return (float(self._Vs[0]), float(self._Vs[-1]))

    def table(self, dv: float | None = None):
        if dv is None or np.isclose(dv, self._Vs[1] - self._Vs[0]):
            return self._Vs.copy(), self._vals.copy(), np.asarray(self.prime(self._Vs))
        return super().table(dv)

    def sup_norm(self):
        return float(np.max(np.abs(self._vals)))

    def _outside(self, V):
        lo, hi = self.v_range
        return (V < lo) | (V > hi)


class BvpPhi(_SplinePhi):
    """Phi backed by the psi boundary-value problem on a standing-wave profile.

    A table over ``[-v_max, v_max]`` with spacing ``dv`` is filled at
    construction; evaluation interpolates it with a cubic spline and falls
    back to a direct solve outside the table.  The derivative is the centred
    difference ``(Phi(V+h) - Phi(V-h)) / 2h`` of direct solves, ``h = 1e-4``.
    """

    kind = "bvp"

    def __init__(self, profile: StandingWaveProfile, beta: float,
                 v_max: float = DEFAULT_V_MAX, dv: float = DEFAULT_DV):
        if beta < 0:
            raise ValueError("beta must be non-negative")
        self.profile = profile
        self.beta = float(beta)
        n = int(round(2 * v_max / dv))
        Vs = np.linspace(-v_max, v_max, n + 1)
        self._build(Vs, phi_direct(profile, Vs, self.beta))

    def direct(self, V):
        return phi_direct(self.profile, V, self.beta)

    def __call__(self, V):
        V = np.asarray(V, dtype=float)
        out = np.asarray(self._spline(V), dtype=float)
        mask = self._outside(V)
        if np.any(mask):
            out = np.array(out, dtype=float, ndmin=1)
            flat = np.atleast_1d(V)
            out[np.atleast_1d(mask)] = self.direct(flat[np.atleast_1d(mask)])
            out = out.reshape(V.shape)
        return out if V.ndim else float(out)

    def prime(self, V):
        V = np.asarray(V, dtype=float)
        h = FD_STEP
        out = (self.direct(V + h) - self.direct(V - h)) / (2.0 * h)
        return out if V.ndim else float(out)

    def describe(self):
        d = super().describe()
        w = self.profile.well
        d.update(well=w.name if w is not None else None, L=self.profile.L, M=self.profile.M,
                 v_range=list(self.v_range))
        return d


class TablePhi(_SplinePhi):
    """Phi read from a ``V, phi[, phi_prime]`` CSV and cubic-interpolated."""

    kind = "table"

    def __init__(self, Vs, vals, beta: float = float("nan"), source: str | None = None):
        Vs = np.asarray(Vs, dtype=float)
        if Vs.size < 4 or np.any(np.diff(Vs) <= 0):
            raise ValueError("table velocities must be strictly increasing (>= 4 rows)")
        self.beta = beta
        self.source = source
        self._build(Vs, vals)
        self._dspline = self._spline.derivative()

    @classmethod
    def from_csv(cls, path, beta: float = float("nan")) -> "TablePhi":
        cols = read_columns(path, ["V", "phi"])
        return cls(cols["V"], cols["phi"], beta=beta, source=str(path))

    def __call__(self, V):
        V = np.asarray(V, dtype=float)
        if np.any(self._outside(V)):
            raise ValueError(f"V outside tabulated range {self.v_range}")
        out = np.asarray(self._spline(V), dtype=float)
        return out if V.ndim else float(out)

    def prime(self, V):
        V = np.asarray(V, dtype=float)
        out = np.asarray(self._dspline(V), dtype=float)
        return out if V.ndim else float(out)

    def describe(self):
        d = super().describe()
        d.update(source=self.source, v_range=list(self.v_range))
        return d


def evaluate_phi(phi: PhiFunction, V):
    return phi(V)


def evaluate_phi_prime(phi: PhiFunction, V):
    return phi.prime(V)


def max_abs_prime(phi: PhiFunction, v_max: float, n_samples: int = 401) -> float:
    Vs = np.linspace(-v_max, v_max, n_samples)
    return float(np.max(np.abs(phi.prime(Vs))))


def estimate_beta_crit(family, v_max: float, beta_hi: float,
                       n_samples: int = 401, width: float = 1e-3) -> float:
    """Bisection estimate of ``sup{beta : max |Phi_beta'| < 1}``.

    ``family`` is either a :class:`StandingWaveProfile` (the psi-backed
    nonlinearity) or a callable mapping ``beta`` to a :class:`PhiFunction`.
    The sup-norm of the derivative is taken over ``n_samples`` equispaced
    velocities in ``[-v_max, v_max]``.

    Raises
    ------
    BracketFailure
        If the predicate already holds at ``beta_hi``.
    """
    if not (v_max > 0 and beta_hi > 0):
        raise ValueError("v_max and beta_hi must be positive")
    if isinstance(family, StandingWaveProfile):
        profile = family
        Vs = np.linspace(-v_max, v_max, n_samples)

        def sup_prime(beta):
            d = (phi_direct(profile, Vs + FD_STEP, beta) - phi_direct(profile, Vs - FD_STEP, beta))
            return float(np.max(np.abs(d))) / (2.0 * FD_STEP)
    else:
        def sup_prime(beta):
            return max_abs_prime(family(beta), v_max, n_samples)

    if sup_prime(beta_hi) < 1.0:
        raise BracketFailure(f"max|Phi'| < 1 already at beta_hi={beta_hi!r}")
    lo, hi = 0.0, float(beta_hi)
    while hi - lo > width:
        mid = 0.5 * (lo + hi)
        if sup_prime(mid) < 1.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def make_phi(source: str, beta: float, *, L: float = 20.0, M: int = 2000,
             v_max: float = DEFAULT_V_MAX, dv: float = DEFAULT_DV) -> PhiFunction:
    """Build a nonlinearity from a short name: ``toy``, a well name, or ``table:<csv>``."""
    from .potential import PotentialWell, solve_standing_wave

    if source == "toy":
        return ToyPhi(beta)
    if source.startswith("table:"):
        return TablePhi.from_csv(source[6:], beta=beta)
    profile = solve_standing_wave(PotentialWell.from_name(source), L, M)
    return BvpPhi(profile, beta, v_max=v_max, dv=dv)

"""Double-well potentials and the standing-wave profile they induce.

The standing wave solves ``theta'' = W'(theta)`` with ``theta(-inf) = 0`` and
``theta(+inf) = 1``.  Multiplying by ``theta'`` and integrating once gives the
first-order problem ``theta' = sqrt(2 W(theta))``, ``theta(0) = 1/2``, which is
what we integrate: no boundary value problem at infinity is needed.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial

from ._csv import read_columns, write_columns
from .errors import DegenerateWell, NonMonotoneProfile

_ROUNDOFF = 1e-14

# 1/4 z^2 (1 - z)^2 in ascending powers
_ALLEN_CAHN = (0.0, 0.0, 0.25, -0.5, 0.25)


@dataclass(frozen=True)
class PotentialWell:
    """Polynomial double well with wells at 0 and 1.

    Use the constructors :meth:`allen_cahn`, :meth:`asymmetric` and
    :meth:`custom` rather than building one by hand.
    """

    kind: str
    coeffs: tuple[float, ...]
    a: float | None = None
    _poly: Polynomial = field(init=False, repr=False, compare=False)
    _dpoly: Polynomial = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        p = Polynomial(np.asarray(self.coeffs, dtype=float))
        object.__setattr__(self, "_poly", p)
        object.__setattr__(self, "_dpoly", p.deriv())
        self._check()

    @classmethod
    def allen_cahn(cls) -> "PotentialWell":
        return cls("allen-cahn", _ALLEN_CAHN)

    @classmethod
    def asymmetric(cls, a: float = 150.0) -> "PotentialWell":
        """``W(z) = 1/4 z^2 (1-z)^2 (1 + a z^2)``."""
        p = Polynomial(_ALLEN_CAHN) * Polynomial([1.0, 0.0, float(a)])
        return cls("asymmetric", tuple(p.coef), a=float(a))

    @classmethod
    def custom(cls, coeffs) -> "PotentialWell":
        """Polynomial with ascending coefficients ``coeffs``."""
        return cls("custom", tuple(float(c) for c in coeffs))

    @classmethod
    def from_name(cls, name: str) -> "PotentialWell":
        """Parse ``allen-cahn``, ``asym<a>`` (e.g. ``asym150``) or ``poly:c0,c1,...``."""
        key = name.strip().lower()
        if key in ("allen-cahn", "allencahn", "ac"):
            return cls.allen_cahn()
        if key.startswith("asym"):
            rest = key[4:].lstrip(":=")
            return cls.asymmetric(float(rest) if rest else 150.0)
        if key.startswith("poly:"):
            return cls.custom([float(c) for c in key[5:].split(",")])
        raise ValueError(f"unknown potential {name!r}")

    @property
    def name(self) -> str:
        if self.kind == "asymmetric":
            return f"asym{self.a:g}"
        if self.kind == "custom":
            return "poly:" + ",".join(repr(c) for c in self.coeffs)
        return self.kind

    @property
    def symmetric(self) -> bool:
        """True when ``W(z) = W(1 - z)``, which makes the nonlinearity even."""
        z = np.linspace(0.0, 1.0, 101)
        return bool(np.allclose(self.W(z), self.W(1.0 - z), rtol=0.0, atol=1e-14))

    def W(self, z):
        return self._poly(z)

    def dW(self, z):
        return self._dpoly(z)

    def _check(self):
        if abs(self.W(0.0)) > 1e-12 or abs(self.W(1.0)) > 1e-12:
            raise DegenerateWell(f"{self.kind}: wells must sit at 0 and 1")
        z = np.linspace(0.0, 1.0, 1001)[1:-1]
        if np.any(self.W(z) <= 0.0):
            raise DegenerateWell(f"{self.kind}: W must be positive on (0, 1)")


@dataclass(frozen=True)
class StandingWaveProfile:
    """Samples of theta_0 on the uniform grid ``z_j = -L + j dz``, ``j = 0..M``."""

    L: float
    M: int
    z: np.ndarray
    theta: np.ndarray
    dtheta: np.ndarray
    weight: np.ndarray
    c0: float
    well: PotentialWell | None = None

    @property
    def dz(self) -> float:
        return 2.0 * self.L / self.M

    @property
    def center(self) -> int:
        return self.M // 2

    def to_csv(self, path):
        return write_columns(path, ["z", "theta", "dtheta"], [self.z, self.theta, self.dtheta])

    @classmethod
    def from_csv(cls, path) -> "StandingWaveProfile":
        cols = read_columns(path, ["z", "theta", "dtheta"])
        z = cols["z"]
        M = len(z) - 1
        L = 0.5 * (z[-1] - z[0])
        return _freeze(L, M, z, cols["theta"], cols["dtheta"], None)


def _freeze(L, M, z, theta, dtheta, well):
    weight = dtheta**2
    arrays = [np.array(a, dtype=float) for a in (z, theta, dtheta, weight)]
    for a in arrays:
        a.setflags(write=False)
    z, theta, dtheta, weight = arrays
    c0 = float(np.trapezoid(weight, z))
    return StandingWaveProfile(float(L), int(M), z, theta, dtheta, weight, c0, well)


def _slope(well: PotentialWell, t: float) -> float:
    t = min(max(t, 0.0), 1.0)
    two_w = 2.0 * float(well.W(t))
    if two_w < 0.0:
        if two_w < -_ROUNDOFF:
            raise DegenerateWell(f"2W({t!r}) = {two_w!r} < 0")
        two_w = 0.0
    return np.sqrt(two_w)


def solve_standing_wave(well: PotentialWell, L: float = 20.0, M: int = 2000) -> StandingWaveProfile:
    """Integrate ``theta' = sqrt(2 W(theta))`` outward from ``theta(0) = 1/2``.

    Classical RK4 at the grid spacing ``dz = 2L/M``; the grid has ``M + 1``
    nodes so that ``z = 0`` is the centre node (``M`` must be even).

    Raises
    ------
    NonMonotoneProfile
        If the computed profile decreases anywhere.
    DegenerateWell
        If ``2 W`` is negative beyond roundoff along the trajectory.
    """
    if not L > 0:
        raise ValueError("L must be positive")
    M = int(M)
    if M < 16 or M % 2:
        raise ValueError("M must be an even integer >= 16")
    dz = 2.0 * L / M
    z = -L + dz * np.arange(M + 1)
    c = M // 2
    z[c] = 0.0
    theta = np.empty(M + 1)
    theta[c] = 0.5
    for step, indices in ((dz, range(c, M)), (-dz, range(c, 0, -1))):
        sgn = 1 if step > 0 else -1
        for j in indices:
            t = theta[j]
            k1 = _slope(well, t)
            k2 = _slope(well, t + 0.5 * step * k1)
            k3 = _slope(well, t + 0.5 * step * k2)
            k4 = _slope(well, t + step * k3)
            theta[j + sgn] = min(max(t + step * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0, 0.0), 1.0)
    if np.any(np.diff(theta) < 0.0):
        raise NonMonotoneProfile("theta_0 is not nondecreasing")
    dtheta = np.array([_slope(well, t) for t in theta])
    return _freeze(L, M, z, theta, dtheta, well)


def compute_c0(profile: StandingWaveProfile) -> float:
    """Trapezoidal ``int (theta_0')^2 dz`` over the truncated grid."""
    return float(np.trapezoid(np.asarray(profile.dtheta) ** 2, profile.z))

"""Closed discrete curves with periodic five-point stencils.

Points are indexed ``0..N-1`` with ``p[i + N] = p[i]`` and the curve
parameter spacing is ``h = 1/N``.  ``D`` and ``D2`` are the fourth-order
centred differences

    D p_i  = (-p_{i+2} + 8 p_{i+1} - 8 p_{i-1} + p_{i-2}) / (12 h)
    D2 p_i = (-p_{i+2} + 16 p_{i+1} - 30 p_i + 16 p_{i-1} - p_{i-2}) / (12 h^2)
"""
from __future__ import annotations

import numpy as np
from scipy.interpolate import CubicSpline

from ._csv import read_columns, write_columns
from .errors import DegenerateTangent

MIN_POINTS = 8
_TANGENT_FLOOR = 1e-12


def _as_points(points) -> np.ndarray:
    p = np.asarray(points, dtype=float)
    if p.ndim != 2 or p.shape[1] != 2:
        raise ValueError("points must have shape (N, 2)")
    return p


def d1(points) -> np.ndarray:
    p = _as_points(points)
    n = len(p)
    if n < 5:
        raise ValueError("five-point stencils need at least 5 points")
    return n * (-np.roll(p, -2, 0) + 8 * np.roll(p, -1, 0) - 8 * np.roll(p, 1, 0) + np.roll(p, 2, 0)) / 12.0


def d2(points) -> np.ndarray:
    p = _as_points(points)
    n = len(p)
    if n < 5:
        raise ValueError("five-point stencils need at least 5 points")
    return n * n * (-np.roll(p, -2, 0) + 16 * np.roll(p, -1, 0) - 30 * p
                    + 16 * np.roll(p, 1, 0) - np.roll(p, 2, 0)) / 12.0


def signed_area(points) -> float:
    p = _as_points(points)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def shoelace_area(points) -> float:
    return abs(signed_area(points))


def length(points) -> float:
    p = _as_points(points)
    return float(np.sum(np.hypot(*(np.roll(p, -1, 0) - p).T)))


def segment_lengths(points) -> np.ndarray:
    p = _as_points(points)
    return np.hypot(*(np.roll(p, -1, 0) - p).T)


def centroid(points) -> np.ndarray:
    """Centroid of the polygon region (falls back to the vertex mean if flat)."""
    p = _as_points(points)
    x, y = p[:, 0], p[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = 0.5 * cross.sum()
    if abs(a) < 1e-300:
        return p.mean(axis=0)
    return np.array([((x + xn) * cross).sum(), ((y + yn) * cross).sum()]) / (6.0 * a)


def isoperimetric_quotient(points) -> float:
    ell = length(points)
    if ell <= 0:
        raise ValueError("curve has zero length")
    return 4.0 * np.pi * shoelace_area(points) / ell**2


def curvature(points) -> np.ndarray:
    """Signed curvature ``det(Dp, D2p) / |Dp|^3`` (positive on CCW circles)."""
    dp, ddp = d1(points), d2(points)
    speed = np.hypot(dp[:, 0], dp[:, 1])
    if np.any(speed <= _TANGENT_FLOOR):
        raise DegenerateTangent(f"|Dp| <= {_TANGENT_FLOOR} at node {int(np.argmin(speed))}")
    return (dp[:, 0] * ddp[:, 1] - dp[:, 1] * ddp[:, 0]) / speed**3


def inward_normals(points) -> np.ndarray:
    """Unit tangent rotated by +pi/2; inward for counterclockwise curves."""
    dp = d1(points)
    speed = np.hypot(dp[:, 0], dp[:, 1])
    if np.any(speed <= _TANGENT_FLOOR):
        raise DegenerateTangent(f"|Dp| <= {_TANGENT_FLOOR} at node {int(np.argmin(speed))}")
    return np.column_stack((-dp[:, 1], dp[:, 0])) / speed[:, None]


def total_turning(points) -> float:
    """``sum_i kappa_i |Dp_i| h``; tends to 2 pi for simple CCW curves."""
    dp = d1(points)
    return float(np.sum(curvature(points) * np.hypot(dp[:, 0], dp[:, 1])) / len(dp))


def _arclength_spline(p: np.ndarray):
    seg = segment_lengths(p)
    s = np.concatenate(([0.0], np.cumsum(seg)))
    closed = np.vstack((p, p[:1]))
    return CubicSpline(s, closed, bc_type="periodic"), s[-1]


def resample_points(points, n_new: int, preserve_area: bool = True, iters: int = 30,
                    extra=None):
    """Equal-chord resampling along a periodic cubic spline through the points.

    Chord lengths are equalised by a few fixed-point sweeps on the spline
    parameter.  With ``preserve_area`` the result is scaled about its centroid
    to the original shoelace area.  ``extra`` is an optional ``(N, k)`` array of
    nodal data that is carried along by the same periodic interpolation.
    """
    p = _as_points(points)
    n_new = int(n_new)
    if n_new < MIN_POINTS:
        raise ValueError(f"need at least {MIN_POINTS} points")
    spline, total = _arclength_spline(p)
    t = total * np.arange(n_new) / n_new
    for _ in range(iters):
        q = spline(t)
        chord = np.hypot(*(np.roll(q, -1, 0) - q).T)
        cum = np.concatenate(([0.0], np.cumsum(chord)))
        if np.ptp(chord) <= 1e-14 * cum[-1]:
            break
        target = cum[-1] * np.arange(n_new) / n_new
        tt = np.concatenate((t, [t[0] + total]))
        t = np.interp(target, cum, tt)
    q = spline(t)
    if preserve_area:
        a_old, a_new = shoelace_area(p), shoelace_area(q)
        if a_new > 0:
            c = centroid(q)
            q = c + (q - c) * np.sqrt(a_old / a_new)
    if extra is None:
        return q
    extra = np.asarray(extra, dtype=float)
    s = np.concatenate(([0.0], np.cumsum(segment_lengths(p))))
    closed = np.concatenate((extra, extra[:1]), axis=0)
    carried = CubicSpline(s, closed, bc_type="periodic", axis=0)(np.mod(t, total))
    return q, carried


def self_intersects(points) -> bool:
    """Segment-pair sweep for proper crossings between non-adjacent edges."""
    p = _as_points(points)
    n = len(p)
    a, b = p, np.roll(p, -1, 0)
    i, j = np.triu_indices(n, 2)
    keep = (j - i) % n != n - 1
    i, j = i[keep], j[keep]

    def orient(u, v, w):
        return (v[:, 0] - u[:, 0]) * (w[:, 1] - u[:, 1]) - (v[:, 1] - u[:, 1]) * (w[:, 0] - u[:, 0])

    o1 = orient(a[i], b[i], a[j])
    o2 = orient(a[i], b[i], b[j])
    o3 = orient(a[j], b[j], a[i])
    o4 = orient(a[j], b[j], b[i])
    return bool(np.any((o1 * o2 < 0) & (o3 * o4 < 0)))


class DiscreteCurve:
    """Closed polygon ``p_0..p_{N-1}``; normalised to counterclockwise order."""

    def __init__(self, points, normalize: bool = True):
        p = np.array(_as_points(points), dtype=float)
        if len(p) < MIN_POINTS:
            raise ValueError(f"a DiscreteCurve needs at least {MIN_POINTS} points")
        if np.min(segment_lengths(p)) <= 0.0:
            raise ValueError("consecutive points coincide")
        if normalize and signed_area(p) < 0:
            p = p[::-1].copy()
        p.setflags(write=False)
        self.points = p

    def __len__(self):
        return len(self.points)

    @property
    def N(self) -> int:
        return len(self.points)

    @property
    def h(self) -> float:
        return 1.0 / len(self.points)

    @property
    def x(self):
        return self.points[:, 0]

    @property
    def y(self):
        return self.points[:, 1]

    def d1(self):
        return d1(self.points)

    def d2(self):
        return d2(self.points)

    def curvature(self):
        return curvature(self.points)

    def inward_normals(self):
        return inward_normals(self.points)

    def area(self):
        return shoelace_area(self.points)

    def signed_area(self):
        return signed_area(self.points)

    def length(self):
        return length(self.points)

    def centroid(self):
        return centroid(self.points)

    def isoperimetric_quotient(self):
        return isoperimetric_quotient(self.points)

    def diameter(self) -> float:
        p = self.points
        return float(np.max(np.hypot(*(p[:, None, :] - p[None, :, :]).transpose(2, 0, 1))))

    def resample(self, n_new: int | None = None, preserve_area: bool = True) -> "DiscreteCurve":
        return DiscreteCurve(resample_points(self.points, n_new or self.N, preserve_area))

    def to_csv(self, path):
        return write_columns(path, ["x", "y"], [self.x, self.y])

    @classmethod
    def from_csv(cls, path) -> "DiscreteCurve":
        cols = read_columns(path, ["x", "y"])
        p = np.column_stack((cols["x"], cols["y"]))
        if len(p) > 1 and np.array_equal(p[0], p[-1]):
            p = p[:-1]
        return cls(p)

    @classmethod
    def circle(cls, radius: float, n: int, center=(0.0, 0.0)) -> "DiscreteCurve":
        t = 2 * np.pi * np.arange(n) / n
        return cls(np.column_stack((center[0] + radius * np.cos(t), center[1] + radius * np.sin(t))))

    @classmethod
    def ellipse(cls, a: float, b: float, n: int, center=(0.0, 0.0)) -> "DiscreteCurve":
        t = 2 * np.pi * np.arange(n) / n
        return cls(np.column_stack((center[0] + a * np.cos(t), center[1] + b * np.sin(t))))


# per-node forms of the stencil operations

def stencil_d1(curve, i: int) -> np.ndarray:
    p = curve.points if isinstance(curve, DiscreteCurve) else _as_points(curve)
    n = len(p)
    return (-p[(i + 2) % n] + 8 * p[(i + 1) % n] - 8 * p[(i - 1) % n] + p[(i - 2) % n]) * n / 12.0


def stencil_d2(curve, i: int) -> np.ndarray:
    p = curve.points if isinstance(curve, DiscreteCurve) else _as_points(curve)
    n = len(p)
    return (-p[(i + 2) % n] + 16 * p[(i + 1) % n] - 30 * p[i % n]
            + 16 * p[(i - 1) % n] - p[(i - 2) % n]) * n * n / 12.0


def curvature_at(curve, i: int) -> float:
    dp, ddp = stencil_d1(curve, i), stencil_d2(curve, i)
    sp = float(np.hypot(*dp))
    if sp <= _TANGENT_FLOOR:
        raise DegenerateTangent(f"|Dp| <= {_TANGENT_FLOOR} at node {i}")
    return float(dp[0] * ddp[1] - dp[1] * ddp[0]) / sp**3


def inward_normal(curve, i: int) -> np.ndarray:
    dp = stencil_d1(curve, i)
    sp = float(np.hypot(*dp))
    if sp <= _TANGENT_FLOOR:
        raise DegenerateTangent(f"|Dp| <= {_TANGENT_FLOOR} at node {i}")
    return np.array([-dp[1], dp[0]]) / sp

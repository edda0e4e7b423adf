"""Traveling-wave profiles by frame-rotated shooting.

A profile moving with speed ``V`` in the +y direction is built from three
graph arcs solving ``y'' = F(y')``:

* back arc, ``F = f_V``, slope 0 -> 1, starting at the lowest point;
* side arc in the frame rotated clockwise by pi/2, ``F = g_V``,
  slope -1 -> 1;
* front arc after a second rotation, ``F = f_{-V}``, started at slope -1 and
  integrated over the horizontal distance back to the symmetry axis.

The slope of the front arc on the axis, ``I2(V, lam)``, vanishes exactly
when the half-curve closes with a horizontal tangent, and the mirror image
completes a C^1 closed profile.  Curves are traversed counterclockwise.

With ``s = sqrt(1 + z^2)``:

    f_V(z) = s^3 (V/s - Phi(V/s) + lam)
    g_V(z) = s^3 (-V z/s - Phi(-V z/s) + lam)
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp

from .errors import NonPositiveRhs, SpanExceeded, StalledArc
from .geometry import curvature, inward_normals, length, resample_points, shoelace_area, signed_area

RTOL = 1e-11
ATOL = 1e-13
_SAMPLES = 2001
_FRONT_CLIP = 1e4


class ShootingRhs:
    """``f_V``, ``f_{-V}`` or ``g_V`` as a vectorised function of the slope."""

    def __init__(self, V: float, lam: float, phi, variant: str = "back"):
        if variant not in ("back", "front", "side"):
            raise ValueError(f"unknown variant {variant!r}")
        self.V = float(V)
        self.lam = float(lam)
        self.phi = phi
        self.variant = variant

    def normal_velocity(self, z):
        z = np.asarray(z, dtype=float)
        s = np.sqrt(1.0 + z * z)
        if self.variant == "back":
            return self.V / s
        if self.variant == "front":
            return -self.V / s
        return -self.V * z / s

    def bracket(self, z):
        """``F(z) / (1 + z^2)^{3/2}``: the curvature demanded by the interface law."""
        u = self.normal_velocity(z)
        return u - self.phi(u) + self.lam

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        return (1.0 + z * z) ** 1.5 * self.bracket(z)


@dataclass
class ArcSolution:
    x: np.ndarray
    y: np.ndarray
    w: np.ndarray
    x_end: float
    y_end: float
    w_end: float
    reason: str  # "slope" | "blowup"


def _sample_rhs(rhs, a0, a1, n=_SAMPLES):
    phis = np.linspace(a0, a1, n)
    with np.errstate(over="ignore", invalid="ignore"):
        vals = np.asarray(rhs(np.tan(phis)), dtype=float)
    return phis, vals


def shoot_arc(rhs, w0: float, stop_slope: float = 1.0, max_span: float = np.inf,
              n_samples: int = 401) -> ArcSolution:
    """Integrate ``w' = rhs(w)``, ``y' = w`` from ``x = 0`` until ``w = stop_slope``.

    The tangent angle ``phi = arctan w`` is used as the independent variable,
    so the terminal slope is hit exactly and ``stop_slope = inf`` (blow-up)
    needs no special treatment:

        dx/dphi = sec^2(phi) / rhs(tan phi),   dy/dphi = tan(phi) dx/dphi.

    Raises
    ------
    StalledArc
        If ``rhs`` vanishes or has the wrong sign between ``w0`` and
        ``stop_slope``; the slope can never reach the target.
    SpanExceeded
        If the abscissa passes ``max_span``.
    """
    if w0 == stop_slope:
        raise ValueError("w0 must differ from stop_slope")
    a0, a1 = float(np.arctan(w0)), float(np.arctan(stop_slope))
    direction = 1.0 if a1 > a0 else -1.0
    _, vals = _sample_rhs(rhs, a0, a1)
    if not np.all(np.isfinite(vals[:-1])) or np.any(direction * vals[:-1] <= 0.0):
        raise StalledArc(f"rhs changes sign between slopes {w0!r} and {stop_slope!r}")

    def deriv(phi, state):
        t = np.tan(phi)
        c2 = np.cos(phi) ** 2
        f = float(rhs(t))
        if direction * f <= 0.0:
            raise StalledArc(f"rhs vanished at slope {t!r}")
        dx = 1.0 / (c2 * f)
        return [dx, t * dx]

    events = None
    if np.isfinite(max_span):
        def span(phi, state):
            return abs(state[0]) - max_span
        span.terminal = True
        events = span
    sol = solve_ivp(deriv, (a0, a1), [0.0, 0.0], method="DOP853", rtol=RTOL, atol=ATOL,
                    dense_output=True, events=events)
    if events is not None and sol.t_events[0].size:
        raise SpanExceeded(f"abscissa exceeded {max_span!r}")
    if not sol.success:
        raise StalledArc(sol.message)
    phis = np.linspace(a0, a1, n_samples)
    xs, ys = sol.sol(phis)
    xs[0] = ys[0] = 0.0
    x_end, y_end = float(sol.y[0, -1]), float(sol.y[1, -1])
    xs[-1], ys[-1] = x_end, y_end
    ws = np.tan(phis)
    return ArcSolution(xs, ys, ws, x_end, y_end, float(stop_slope),
                       "blowup" if np.isinf(stop_slope) else "slope")


def shoot_to_abscissa(rhs, w0: float, x_end: float, n_samples: int = 401):
    """Integrate ``w' = rhs(w)`` in ``x`` over ``[0, x_end]``.

    Returns ``(xs, ys, ws, w_end)``; ``w_end`` is ``+-inf`` if the slope
    blows up first (the arc is then truncated at the blow-up).
    """
    def deriv(x, state):
        return [float(rhs(state[0])), state[0]]

    def clip(x, state):
        return abs(state[0]) - _FRONT_CLIP
    clip.terminal = True
    xs = np.linspace(0.0, x_end, n_samples)
    sol = solve_ivp(deriv, (0.0, x_end), [w0, 0.0], method="DOP853", rtol=RTOL, atol=ATOL,
                    dense_output=True, events=clip)
    if sol.t_events[0].size:
        xb = float(sol.t_events[0][0])
        w = np.sign(sol.y_events[0][0][0]) * np.inf
        xs = xs[xs < xb]
        ws, ys = sol.sol(xs)
        return xs, ys, ws, w
    ws, ys = sol.sol(xs)
    return xs, ys, ws, float(sol.y[0, -1])


def blowup_abscissa_by_quadrature(rhs, n_check: int = 4001) -> float:
    """``int_0^inf dz / rhs(z)`` via ``z = tan(theta)``.

    Raises
    ------
    NonPositiveRhs
        If sampling finds ``rhs <= 0`` on ``[0, inf)``.
    """
    th = np.linspace(0.0, 0.5 * np.pi, n_check)[:-1]
    if np.any(np.asarray(rhs(np.tan(th))) <= 0.0):
        raise NonPositiveRhs("rhs is not positive on [0, inf)")

    def integrand(theta):
        c = np.cos(theta)
        if c == 0.0:
            return 0.0
        return 1.0 / (c * c * float(rhs(np.tan(theta))))

    val, _ = quad(integrand, 0.0, 0.5 * np.pi, epsabs=0.0, epsrel=1e-12, limit=400)
    return float(val)


@dataclass
class Closure:
    V: float
    lam: float
    back: ArcSolution
    side: ArcSolution
    front_x: np.ndarray
    front_y: np.ndarray
    front_w: np.ndarray
    span: float
    I2: float


def shoot_closure(V: float, lam: float, phi, n_samples: int = 401) -> Closure:
    """Run the three-arc construction and keep every arc for assembly."""
    back = shoot_arc(ShootingRhs(V, lam, phi, "back"), 0.0, 1.0, n_samples=n_samples)
    side = shoot_arc(ShootingRhs(V, lam, phi, "side"), -back.w_end, 1.0, n_samples=n_samples)
    span = back.x_end - side.y_end
    if not span > 0.0:
        # the side arc already crossed the symmetry axis: no simple closed curve
        raise StalledArc(f"matching abscissa {span!r} is not positive")
    fx, fy, fw, w_end = shoot_to_abscissa(ShootingRhs(V, lam, phi, "front"), -side.w_end, span,
                                          n_samples=n_samples)
    return Closure(float(V), float(lam), back, side, fx, fy, fw, float(span), float(w_end))


def closure_functional_I2(V: float, lam: float, phi) -> float:
    """Front-arc slope at the matching abscissa; zero for a closed C^1 profile.

    Raises :class:`StalledArc` when the back or side arc cannot reach slope 1.
    """
    return shoot_closure(V, lam, phi, n_samples=2).I2


def I2_or_nan(V: float, lam: float, phi) -> float:
    try:
        return closure_functional_I2(V, lam, phi)
    except StalledArc:
        return float("nan")


def lambda_of_V(V: float, phi) -> float:
    """``2 sup|Phi| + V``, which keeps both ``f_V`` and ``f_{-V}`` positive."""
    return 2.0 * phi.sup_norm() + V


def integral_criterion_I(V: float, phi, lam: float | None = None) -> float:
    """``I(V)`` in the form with the ``1/sqrt(V^2 - z^2)`` endpoint weight.

    Evaluated with ``z = V sin(theta)`` which removes the singularity.  ``lam``
    defaults to ``lambda_of_V``.
    """
    if not V > 0:
        raise ValueError("V must be positive")
    lam = lambda_of_V(V, phi) if lam is None else lam

    def integrand(theta):
        z = V * np.sin(theta)
        pz, pm = phi(z), phi(-z)
        return z * (2 * z + pm - pz) / ((z - pz + lam) * (-z - pm + lam))

    val, _ = quad(integrand, 0.0, 0.5 * np.pi, epsabs=1e-15, epsrel=1e-10, limit=400)
    return float(val / V)


def integral_criterion_I_free(V: float, lam: float, phi) -> float:
    """``int_0^inf (1/f_{-V} - 1/f_V) dz`` for a free ``lam`` (difference of blow-up abscissae)."""
    back = ShootingRhs(V, lam, phi, "back")
    front = ShootingRhs(V, lam, phi, "front")
    return blowup_abscissa_by_quadrature(front) - blowup_abscissa_by_quadrature(back)


@dataclass
class TravelingWaveProfile:
    points: np.ndarray  # closed CCW polygon, first point repeated at the end
    V: float
    lam: float
    closure_residual: float
    beta: float = float("nan")
    glue_angles: list = field(default_factory=list)

    @property
    def open_points(self) -> np.ndarray:
        return self.points[:-1]

    def length(self) -> float:
        return length(self.open_points)

    def area(self) -> float:
        return shoelace_area(self.open_points)

    def interface_residual(self, phi) -> float:
        """max |V_n - (kappa + Phi(V_n) - lam)| with ``V_n`` the normal speed of the translation."""
        p = self.open_points
        vn = inward_normals(p) @ np.array([0.0, self.V])
        return float(np.max(np.abs(vn - (curvature(p) + phi(vn) - self.lam))))

    def metadata(self) -> dict:
        return {"V": self.V, "lambda": self.lam, "beta": self.beta,
                "closure_residual": self.closure_residual}

    def to_files(self, csv_path, json_path=None):
        import json
        from pathlib import Path

        from ._csv import write_columns

        write_columns(csv_path, ["x", "y"], [self.points[:, 0], self.points[:, 1]])
        json_path = Path(json_path) if json_path else Path(csv_path).with_suffix(".json")
        json_path.write_text(json.dumps(self.metadata(), indent=2, sort_keys=True) + "\n")
        return csv_path, json_path


def _frame1(v):
    return np.array([-v[1], v[0]])


def _frame2(v):
    return -v


def _turn(a, b):
    return float(abs(np.arctan2(a[0] * b[1] - a[1] * b[0], a @ b)))


def assemble_profile(closure: Closure, n_points: int = 256, beta: float = float("nan")) -> TravelingWaveProfile:
    """Glue back, side and front arcs, mirror across the axis, resample."""
    b, s = closure.back, closure.side
    back = np.column_stack((b.x, b.y))
    p1 = back[-1]
    # frame 1 -> original: (X, Y) -> (-Y, X)
    side = p1 + np.column_stack((-s.y, s.x))
    p2 = side[-1]
    # frame 2 -> original: (X, Y) -> (-X, -Y)
    front = p2 + np.column_stack((-closure.front_x, -closure.front_y))
    front[-1, 0] = 0.0
    right = np.vstack((back, side[1:], front[1:]))
    left = right[-2:0:-1] * np.array([-1.0, 1.0])
    poly = np.vstack((right, left))
    if signed_area(poly) < 0:
        poly = poly[::-1]
    # tangent mismatch at the glue points, from the exact arc slopes (radians)
    fw_end = closure.I2 if np.isfinite(closure.I2) else np.inf
    glue = [
        _turn(np.array([1.0, b.w_end]), _frame1(np.array([1.0, s.w[0]]))),
        _turn(_frame1(np.array([1.0, s.w_end])), _frame2(np.array([1.0, closure.front_w[0]]))),
        2.0 * abs(float(np.arctan(fw_end))),
    ]
    pts = resample_points(poly, n_points, preserve_area=False)
    pts = np.vstack((pts, pts[:1]))
    return TravelingWaveProfile(pts, closure.V, closure.lam, abs(closure.I2), beta, glue)


@dataclass
class Landscape:
    Vs: np.ndarray
    lams: np.ndarray
    values: np.ndarray  # shape (len(Vs), len(lams)); nan where an arc stalls

    def to_csv(self, path):
        from ._csv import write_columns

        VV, LL = np.meshgrid(self.Vs, self.lams, indexing="ij")
        return write_columns(path, ["V", "lambda", "I2"], [VV.ravel(), LL.ravel(), self.values.ravel()])


def I2_landscape(phi, v_range, lambda_range, grid) -> Landscape:
    nv, nl = grid
    Vs = np.linspace(v_range[0], v_range[1], int(nv))
    lams = np.linspace(lambda_range[0], lambda_range[1], int(nl))
    vals = np.array([[I2_or_nan(V, lam, phi) for lam in lams] for V in Vs])
    return Landscape(Vs, lams, vals)


def _bisect(fun, a, b, fa, fb, tol=1e-8, xtol=1e-13, max_iter=200):
    """Bisect a bracketed sign change down to width ``xtol`` (relative).

    The midpoint is accepted as a root only if ``|fun| <= tol`` there.
    """
    for _ in range(max_iter):
        if abs(b - a) <= xtol * max(1.0, abs(a), abs(b)):
            break
        m = 0.5 * (a + b)
        fm = fun(m)
        if np.isnan(fm):
            return None
        if fm == 0.0:
            return m, fm
        if np.sign(fm) == np.sign(fa):
            a, fa = m, fm
        else:
            b, fb = m, fm
    m = 0.5 * (a + b)
    fm = fun(m)
    return (m, fm) if np.isfinite(fm) and abs(fm) <= tol else None


def _sign_changes(vals):
    s = np.sign(vals)
    ok = ~np.isnan(vals)
    return [k for k in range(len(vals) - 1)
            if ok[k] and ok[k + 1] and s[k] != 0 and s[k + 1] != 0 and s[k] != s[k + 1]
            and (np.isfinite(vals[k]) or np.isfinite(vals[k + 1]))]


def find_traveling_waves(phi, v_range, lambda_range, grid=(16, 16), n_points: int = 256,
                         tol: float = 1e-8, both_axes: bool = True, landscape: Landscape | None = None):
    """Scan ``I2`` on a ``(V, lam)`` grid, refine sign changes, assemble profiles.

    Brackets along ``lam`` at fixed ``V`` are refined by bisection in ``lam``.
    With ``both_axes`` brackets along ``V`` at fixed ``lam`` are refined too;
    the zero set is a curve that can run almost parallel to the ``lam`` axis.
    Roots closer than a grid cell to an already accepted root on the same
    line are dropped.  Returns ``(roots, landscape)`` with ``roots`` a list of
    ``(V, lam, TravelingWaveProfile)``.
    """
    nv, nl = grid
    if nv < 8 or nl < 8:
        raise ValueError("grid must be at least 8 x 8")
    if not (v_range[1] > v_range[0] and lambda_range[1] > lambda_range[0]):
        raise ValueError("ranges must have positive width")
    land = landscape or I2_landscape(phi, v_range, lambda_range, grid)
    Vs, lams, vals = land.Vs, land.lams, land.values
    found = []
    for i, V in enumerate(Vs):
        if V == 0.0:
            continue
        for k in _sign_changes(vals[i]):
            r = _bisect(lambda lam: I2_or_nan(V, lam, phi), lams[k], lams[k + 1], vals[i, k], vals[i, k + 1], tol)
            if r is not None:
                found.append((float(V), float(r[0]), float(r[1])))
    if both_axes:
        for j, lam in enumerate(lams):
            col = vals[:, j]
            for k in _sign_changes(col):
                if Vs[k] <= 0.0 <= Vs[k + 1] or Vs[k] >= 0.0 >= Vs[k + 1]:
                    continue
                r = _bisect(lambda V: I2_or_nan(V, lam, phi), Vs[k], Vs[k + 1], col[k], col[k + 1], tol)
                if r is not None:
                    found.append((float(r[0]), float(lam), float(r[1])))
    dv = (v_range[1] - v_range[0]) / max(nv - 1, 1)
    dl = (lambda_range[1] - lambda_range[0]) / max(nl - 1, 1)
    roots = []
    for V, lam, res in sorted(found):
        if abs(V) < 1e-6:
            continue
        if any(abs(V - V2) < 0.5 * dv and abs(lam - l2) < 0.5 * dl for V2, l2, _ in roots):
            continue
        try:
            prof = assemble_profile(shoot_closure(V, lam, phi), n_points, getattr(phi, "beta", float("nan")))
        except StalledArc:
            continue
        roots.append((V, lam, prof))
    return roots, land


def root_on_lambda_of_V(phi, v_lo: float, v_hi: float, tol: float = 1e-10) -> float:
    """V-root of ``I2(V, lambda_of_V(V))`` by bisection (same lambda as ``integral_criterion_I``)."""
    norm2 = 2.0 * phi.sup_norm()
    fun = lambda V: I2_or_nan(V, norm2 + V, phi)
    fa, fb = fun(v_lo), fun(v_hi)
    if not (np.sign(fa) != np.sign(fb)):
        raise ValueError("no sign change on the given V interval")
    r = _bisect(fun, v_lo, v_hi, fa, fb, tol=tol)
    if r is None:
        raise ValueError("bisection failed")
    return r[0]

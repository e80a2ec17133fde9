"""Target curves with exact first and second derivatives.

Every curve is described by a :class:`CurveSpec` and evaluated through
:meth:`CurveSpec.evaluate`, which is vectorized over the parameter and
returns ``(a, a', a'')``. Analytic kinds use closed forms; ``bspline`` uses
de Boor's algorithm on the curve and on its derivative control polygons.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import integrate

KINDS = ("circle", "semicircle", "spiral", "sphere_arc", "naca4", "bspline")

DOMAIN_SLACK = 1e-14


class CurveError(ValueError):
    """Invalid curve specification."""


class DomainError(CurveError):
    """Parameter outside the curve domain."""


class DegenerateFrameError(CurveError):
    """Frenet frame undefined (vanishing tangent or curvature)."""


# ---------------------------------------------------------------------------
# B-spline helpers


def _deboor(t, knots, ctrl, k):
    """Evaluate a spline of degree k at the parameters t (vectorized)."""
    m = len(ctrl)
    span = np.searchsorted(knots, t, side="right") - 1
    span = np.clip(span, k, m - 1)
    idx = span[None, :] - k + np.arange(k + 1)[:, None]
    d = ctrl[idx].copy()  # (k+1, T, n)
    for r in range(1, k + 1):
        for j in range(k, r - 1, -1):
            i = span - k + j
            lo = knots[i]
            hi = knots[i + k + 1 - r]
            den = hi - lo
            with np.errstate(invalid="ignore", divide="ignore"):
                alpha = np.where(den > 0, (t - lo) / np.where(den > 0, den, 1.0), 0.0)
            d[j] = (1.0 - alpha)[:, None] * d[j - 1] + alpha[:, None] * d[j]
    return d[k]


def _derivative_polygon(ctrl, knots, k):
    """Control points and knots of the derivative spline (degree k-1)."""
    den = knots[k + 1 : len(ctrl) + k] - knots[1 : len(ctrl)]
    with np.errstate(invalid="ignore", divide="ignore"):
        scale = np.where(den > 0, k / np.where(den > 0, den, 1.0), 0.0)
    dctrl = scale[:, None] * np.diff(ctrl, axis=0)
    return dctrl, knots[1:-1], k - 1


# ---------------------------------------------------------------------------
# NACA 4-digit helpers

_NACA_A = (0.2969, -0.1260, -0.3516, 0.2843, -0.1036)  # closed trailing edge


def _naca_thickness(psi, tc):
    """Signed half thickness T(psi) for chordwise station X = psi**2.

    psi > 0 is the upper surface; the odd powers of |psi| make the sign flip
    through the leading edge.
    """
    a0, a1, a2, a3, a4 = _NACA_A
    sg = np.sign(psi)
    T = a0 * psi + sg * (a1 * psi**2 + a2 * psi**4 + a3 * psi**6 + a4 * psi**8)
    dT = a0 + sg * (2 * a1 * psi + 4 * a2 * psi**3 + 6 * a3 * psi**5 + 8 * a4 * psi**7)
    d2T = sg * (2 * a1 + 12 * a2 * psi**2 + 30 * a3 * psi**4 + 56 * a4 * psi**6)
    f = 5.0 * tc
    return f * T, f * dT, f * d2T


def _naca_camber(X, m, p):
    """Camber line yc(X) and its first three derivatives."""
    zero = np.zeros_like(X)
    if m == 0.0 or p == 0.0:
        return zero, zero, zero, zero
    fore = X < p
    c1 = m / p**2
    c2 = m / (1.0 - p) ** 2
    yc = np.where(fore, c1 * (2 * p * X - X**2), c2 * ((1 - 2 * p) + 2 * p * X - X**2))
    d1 = np.where(fore, 2 * c1 * (p - X), 2 * c2 * (p - X))
    d2 = np.where(fore, -2 * c1, -2 * c2)
    return yc, d1, d2, zero


def _naca_eval(t, m, p, tc, chord):
    # X = psi**2 with psi = -cos(t/2): lower surface for t < pi, upper after.
    psi = -np.cos(0.5 * t)
    dpsi = 0.5 * np.sin(0.5 * t)
    d2psi = 0.25 * np.cos(0.5 * t)

    X = psi**2
    Xp, Xpp = 2 * psi, 2.0
    T, Tp, Tpp = _naca_thickness(psi, tc)
    yc, yc1, yc2, yc3 = _naca_camber(X, m, p)
    th = np.arctan(yc1)
    g = 1.0 + yc1**2
    th1 = yc2 / g
    th2 = (yc3 * g - 2 * yc1 * yc2**2) / g**2
    s, c = np.sin(th), np.cos(th)

    # derivatives with respect to psi
    thp = th1 * Xp
    thpp = th2 * Xp**2 + th1 * Xpp
    x = X - T * s
    xp = Xp - Tp * s - T * c * thp
    xpp = Xpp - Tpp * s - 2 * Tp * c * thp + T * s * thp**2 - T * c * thpp
    y = yc + T * c
    yp = yc1 * Xp + Tp * c - T * s * thp
    ypp = yc2 * Xp**2 + yc1 * Xpp + Tpp * c - 2 * Tp * s * thp - T * c * thp**2 - T * s * thpp

    pt = np.stack([x, y], axis=-1)
    d1 = np.stack([xp * dpsi, yp * dpsi], axis=-1)
    d2 = np.stack([xpp * dpsi**2 + xp * d2psi, ypp * dpsi**2 + yp * d2psi], axis=-1)
    return chord * pt, chord * d1, chord * d2


def _naca_digits(code) -> tuple[float, float, float]:
    digits = f"{int(round(float(code))):04d}"
    if len(digits) != 4:
        raise CurveError(f"naca4 code must have 4 digits, got {code!r}")
    return int(digits[0]) / 100.0, int(digits[1]) / 10.0, int(digits[2:]) / 100.0


# ---------------------------------------------------------------------------


@dataclass(eq=False)
class CurveSpec:
    """A parametric curve a:[t_lo, t_hi] -> R^n.

    ``params`` per kind:

    - circle / semicircle: ``[radius]``
    - spiral: ``[outer_radius, turns]`` (Archimedean, r = c*theta)
    - sphere_arc: ``[]`` (unit sphere, latitude t/4)
    - naca4: ``[code, chord, warp]`` with e.g. ``code=12`` for "0012"; the
      surface angle is t + warp*sin(t), so |warp| < 1 skews the parameter
      speed (slow trailing edge for warp < 0) without moving the ends or
      the leading edge
    - bspline: ``[]``; uses ``control_points``, ``knots`` and ``degree``
    """

    kind: str
    params: Sequence[float] = ()
    domain: Optional[Sequence[float]] = None
    control_points: Optional[np.ndarray] = None
    knots: Optional[np.ndarray] = None
    degree: Optional[int] = None
    name: str = ""
    _cache: dict = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise CurveError(f"unknown curve kind {self.kind!r}")
        self.params = tuple(float(v) for v in self.params)
        if self.kind == "bspline":
            self._init_bspline()
        if self.domain is None:
            self.domain = self._default_domain()
        lo, hi = (float(v) for v in self.domain)
        if not lo < hi:
            raise CurveError(f"domain must satisfy t_lo < t_hi, got {self.domain}")
        self.domain = (lo, hi)
        if not self.name:
            self.name = self.kind
        if self.kind == "naca4":
            code = self.params[0] if self.params else 12
            self._cache["naca"] = _naca_digits(code)
            warp = self.params[2] if len(self.params) > 2 else 0.0
            if not abs(warp) < 1.0:
                raise CurveError(f"naca4 warp must satisfy |warp| < 1, got {warp}")
        if self.kind == "spiral":
            r_out, turns = (self.params + (1.0, 3.0)[len(self.params):])[:2]
            self._cache["spiral_c"] = r_out / (2 * np.pi * turns)

    def _init_bspline(self):
        if self.control_points is None or self.knots is None or self.degree is None:
            raise CurveError("bspline requires control_points, knots and degree")
        P = np.asarray(self.control_points, dtype=float)
        U = np.asarray(self.knots, dtype=float)
        k = int(self.degree)
        if P.ndim != 2 or P.shape[1] not in (2, 3):
            raise CurveError("bspline control points must be an (m, 2) or (m, 3) array")
        m = P.shape[0]
        if k < 1:
            raise CurveError("bspline degree must be >= 1")
        if m < k + 1:
            raise CurveError(f"bspline of degree {k} needs at least {k + 1} control points, got {m}")
        if U.ndim != 1 or len(U) != m + k + 1:
            raise CurveError(f"knot vector must have length m + k + 1 = {m + k + 1}, got {len(U)}")
        if np.any(np.diff(U) < 0):
            raise CurveError("knot vector must be nondecreasing")
        if not U[k] < U[m]:
            raise CurveError("knot vector has an empty valid span")
        self.control_points, self.knots, self.degree = P, U, k
        polys = [(P, U, k)]
        for _ in range(2):
            c, u, d = polys[-1]
            if d == 0:
                polys.append((np.zeros((1, P.shape[1])), np.array([u[0], u[-1]]), 0))
            else:
                polys.append(_derivative_polygon(c, u, d))
        self._cache["polys"] = polys

    def _default_domain(self):
        if self.kind == "circle":
            return (0.0, 2 * np.pi)
        if self.kind == "semicircle":
            return (0.0, np.pi)
        if self.kind == "spiral":
            turns = self.params[1] if len(self.params) > 1 else 3.0
            return (0.0, 2 * np.pi * turns)
        if self.kind == "sphere_arc":
            return (0.0, np.pi)
        if self.kind == "naca4":
            return (0.0, 2 * np.pi)
        k, m = self.degree, len(self.control_points)
        return (float(self.knots[k]), float(self.knots[m]))

    # ------------------------------------------------------------------

    @property
    def dim(self) -> int:
        if self.kind == "bspline":
            return self.control_points.shape[1]
        return 3 if self.kind == "sphere_arc" else 2

    @property
    def breaks(self) -> np.ndarray:
        """Interior parameters where the curve may lose smoothness."""
        lo, hi = self.domain
        if self.kind == "bspline":
            pts = np.unique(self.knots)
        elif self.kind == "naca4":
            pts = np.array([np.pi])
        else:
            pts = np.array([])
        return pts[(pts > lo) & (pts < hi)]

    def check(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        lo, hi = self.domain
        if np.any(t < lo - DOMAIN_SLACK) or np.any(t > hi + DOMAIN_SLACK):
            raise DomainError(f"parameter outside domain [{lo}, {hi}]")
        return np.clip(t, lo, hi)

    def evaluate(self, t, check: bool = False):
        """Return ``(a, a', a'')`` at the parameters ``t``.

        Shapes follow ``t`` with a trailing axis of length ``dim``. With
        ``check=False`` the closed forms (or end polynomial pieces of a
        spline) are extended beyond the domain; the optimizer relies on this
        to evaluate trial points that later fail the validity test.
        """
        t = np.asarray(t, dtype=float)
        if check:
            t = self.check(t)
        shape = t.shape
        tt = t.reshape(-1)
        a, d1, d2 = getattr(self, "_eval_" + self.kind)(tt)
        n = a.shape[-1]
        return a.reshape(shape + (n,)), d1.reshape(shape + (n,)), d2.reshape(shape + (n,))

    def _eval_circle(self, t):
        r = self.params[0] if self.params else 1.0
        c, s = np.cos(t), np.sin(t)
        return (r * np.stack([c, s], -1), r * np.stack([-s, c], -1), r * np.stack([-c, -s], -1))

    _eval_semicircle = _eval_circle

    def _eval_spiral(self, t):
        k = self._cache["spiral_c"]
        c, s = np.cos(t), np.sin(t)
        a = k * np.stack([t * c, t * s], -1)
        d1 = k * np.stack([c - t * s, s + t * c], -1)
        d2 = k * np.stack([-2 * s - t * c, 2 * c - t * s], -1)
        return a, d1, d2

    def _eval_sphere_arc(self, t):
        c, s = np.cos(t), np.sin(t)
        cq, sq = np.cos(t / 4), np.sin(t / 4)
        a = np.stack([c * cq, s * cq, sq], -1)
        d1 = np.stack([-s * cq - 0.25 * c * sq, c * cq - 0.25 * s * sq, 0.25 * cq], -1)
        d2 = np.stack(
            [
                -c * cq + 0.5 * s * sq - 0.0625 * c * cq,
                -s * cq - 0.5 * c * sq - 0.0625 * s * cq,
                -0.0625 * sq,
            ],
            -1,
        )
        return a, d1, d2

    def _eval_naca4(self, t):
        m, p, tc = self._cache["naca"]
        chord = self.params[1] if len(self.params) > 1 else 1.0
        warp = self.params[2] if len(self.params) > 2 else 0.0
        if warp == 0.0:
            return _naca_eval(t, m, p, tc, chord)
        u = t + warp * np.sin(t)
        u1 = 1.0 + warp * np.cos(t)
        u2 = -warp * np.sin(t)
        a, d1, d2 = _naca_eval(u, m, p, tc, chord)
        return a, d1 * u1[:, None], d2 * (u1**2)[:, None] + d1 * u2[:, None]

    def _eval_bspline(self, t):
        return tuple(_deboor(t, u, c, k) for c, u, k in self._cache["polys"])

    def to_dict(self) -> dict:
        d = {"name": self.name, "kind": self.kind, "params": list(self.params), "domain": list(self.domain)}
        if self.kind == "bspline":
            d["control_points"] = self.control_points.tolist()
            d["knots"] = self.knots.tolist()
            d["degree"] = self.degree
        return d


# ---------------------------------------------------------------------------
# builtin constructors


def circle(radius=1.0, domain=None, name="circle"):
    return CurveSpec("circle", [radius], domain=domain, name=name)


def semicircle(radius=1.0, name="semicircle"):
    return CurveSpec("semicircle", [radius], name=name)


def spiral(outer_radius=1.0, turns=3.0, name="spiral"):
    return CurveSpec("spiral", [outer_radius, turns], name=name)


def sphere_arc(domain=None, name="sphere_arc"):
    return CurveSpec("sphere_arc", [], domain=domain, name=name)


def naca4(code="0012", chord=1.0, warp=0.0, name=None):
    return CurveSpec("naca4", [int(code), chord, warp], name=name or f"naca{code}")


def bspline(control_points, knots, degree, name="bspline"):
    return CurveSpec("bspline", [], control_points=control_points, knots=knots, degree=degree, name=name)


def clamped_knots(n_ctrl: int, degree: int, lo=0.0, hi=1.0) -> np.ndarray:
    """Open uniform knot vector with end multiplicity degree + 1."""
    inner = np.linspace(lo, hi, n_ctrl - degree + 1)
    return np.concatenate([np.full(degree, lo), inner, np.full(degree, hi)])


def line(p0, p1, name="line"):
    """Straight segment as a degree-1 B-spline."""
    P = np.array([p0, p1], dtype=float)
    return bspline(P, [0.0, 0.0, 1.0, 1.0], 1, name=name)


BUILTINS = {
    "circle": circle,
    "semicircle": semicircle,
    "spiral": spiral,
    "sphere_arc": sphere_arc,
    "naca0012": lambda: naca4("0012"),
    # slow trailing edge; coarse meshes of this one tangle without the barrier
    "naca0012_warped": lambda: naca4("0012", warp=-0.9, name="naca0012_warped"),
}


def builtin(name: str) -> CurveSpec:
    try:
        return BUILTINS[name]()
    except KeyError:
        raise CurveError(f"unknown builtin curve {name!r}; choose from {sorted(BUILTINS)}") from None


def is_straight(curve: CurveSpec, samples: int = 64, rtol: float = 1e-12) -> bool:
    """True when the sampled curve lies on the chord between its endpoints."""
    t = np.linspace(*curve.domain, samples)
    a = curve.evaluate(t)[0]
    chord = a[-1] - a[0]
    length = np.linalg.norm(chord)
    if length == 0.0:
        return False
    u = chord / length
    rel = a - a[0]
    off = rel - np.outer(rel @ u, u)
    return bool(np.max(np.linalg.norm(off, axis=1)) <= rtol * length)


# ---------------------------------------------------------------------------
# public evaluation API


def eval_curve(curve: CurveSpec, t):
    return curve.evaluate(t, check=True)[0]


def eval_d1(curve: CurveSpec, t):
    return curve.evaluate(t, check=True)[1]


def eval_d2(curve: CurveSpec, t):
    return curve.evaluate(t, check=True)[2]


@dataclass(frozen=True)
class FrenetFrame:
    t: np.ndarray
    normal: np.ndarray
    binormal: Optional[np.ndarray] = None


def frenet_frames(curve: CurveSpec, t, check: bool = True):
    """Vectorized tangent, normal (and binormal in 3D) at parameters ``t``."""
    _, d1, d2 = curve.evaluate(t, check=check)
    speed = np.linalg.norm(d1, axis=-1, keepdims=True)
    if np.any(speed <= 1e-12):
        raise DegenerateFrameError("vanishing tangent")
    tan = d1 / speed
    if curve.dim == 2:
        nor = np.stack([-tan[..., 1], tan[..., 0]], -1)
        return tan, nor, None
    perp = d2 - np.sum(d2 * tan, -1, keepdims=True) * tan
    curv = np.linalg.norm(perp, axis=-1, keepdims=True) / speed**2
    if np.any(curv <= 1e-12):
        raise DegenerateFrameError("vanishing curvature, normal undefined")
    nor = perp / np.linalg.norm(perp, axis=-1, keepdims=True)
    return tan, nor, np.cross(tan, nor)


def frenet(curve: CurveSpec, t: float) -> FrenetFrame:
    tan, nor, bi = frenet_frames(curve, np.array([t]))
    return FrenetFrame(tan[0], nor[0], None if bi is None else bi[0])


def speed(curve: CurveSpec, t):
    return np.linalg.norm(curve.evaluate(t)[1], axis=-1)


def arc_length(curve: CurveSpec, t0: float, t1: float) -> float:
    """Length of the curve between t0 <= t1, adaptive Gauss-Kronrod."""
    lo, hi = curve.domain
    if not (lo - DOMAIN_SLACK <= t0 <= t1 <= hi + DOMAIN_SLACK):
        raise DomainError(f"need {lo} <= t0 <= t1 <= {hi}, got ({t0}, {t1})")
    if t0 == t1:
        return 0.0
    pts = [b for b in curve.breaks if t0 < b < t1]
    f = lambda u: float(np.linalg.norm(curve.evaluate(np.array([u]))[1][0]))
    val, _ = integrate.quad(f, t0, t1, epsabs=0.0, epsrel=1e-10, limit=500, points=pts or None)
    return float(val)

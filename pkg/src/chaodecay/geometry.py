"""Cavity shapes: boundary parametrization, interior tests, ray-boundary intersection.

Three boundaries are supported:

* ``circle``   -- radius ``scale``; integrable, used as a control case,
* ``cardioid`` -- polar radius scale*(1 + cos(angle)); fully chaotic, has a
                  cusp on the negative-x side,
* ``stadium``  -- two semicircular caps of radius ``scale`` joined by straight
                  segments of length 2*scale; fully chaotic, piecewise smooth.

Arclength runs counterclockwise; the inward unit normal is the tangent rotated
by +90 degrees.  Ray intersection is exact for the circle and stadium
(line/circle pieces) and reduces to a quartic for the cardioid, solved for the
whole batch at once via companion-matrix eigenvalues plus a couple of Newton
polishing steps.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = ["CavityGeometry", "SHAPES"]

SHAPES = ("circle", "cardioid", "stadium")

# Minimal admissible flight distance, in units of scale.  Filters the tau=0
# root produced by a particle sitting exactly on the boundary.
_TAU_MIN = 1e-10

# A cardioid hit with boundary radius below this (units of scale) counts as a
# cusp hit and is retroreflected instead of reflected off an undefined normal.
_CUSP_RADIUS = 1e-9


@dataclass(frozen=True)
class CavityGeometry:
    """A billiard table with an absorbing opening on its boundary.

    The opening is the arclength interval of length ``opening_length``
    centred at ``opening_center`` (wrapping around the perimeter is fine).
    ``center`` translates the whole cavity; dynamics and statistics are
    translation invariant.
    """

    shape: str
    scale: float = 1.0
    opening_center: float = 0.0
    opening_length: float = 0.1
    center: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}; expected one of {SHAPES}")
        if not (self.scale > 0):
            raise ValueError("scale must be positive")
        if not (0 < self.opening_length < self.perimeter):
            raise ValueError("opening_length must lie strictly between 0 and the perimeter")
        if not math.isfinite(self.opening_center):
            raise ValueError("opening_center must be finite")

    # -- global measures ---------------------------------------------------

    @cached_property
    def area(self) -> float:
        a = self.scale
        if self.shape == "circle":
            return math.pi * a * a
        if self.shape == "cardioid":
            return 1.5 * math.pi * a * a
        return (4.0 + math.pi) * a * a  # stadium: 2a x 2a rectangle + two caps

    @cached_property
    def perimeter(self) -> float:
        a = self.scale
        if self.shape == "circle":
            return 2.0 * math.pi * a
        if self.shape == "cardioid":
            return 8.0 * a
        return (4.0 + 2.0 * math.pi) * a

    def geometry_hash(self) -> str:
        key = (
            f"{self.shape}|{self.scale!r}|{self.opening_center!r}|"
            f"{self.opening_length!r}|{self.center[0]!r},{self.center[1]!r}"
        )
        return hashlib.sha1(key.encode()).hexdigest()[:16]

    # -- boundary parametrization ------------------------------------------

    def boundary_point(self, s):
        """Position and inward unit normal at arclength ``s`` (broadcasts).

        Raises for arclengths outside [0, perimeter]; use ``s % perimeter``
        first when wrapping is intended.
        """
        s = np.asarray(s, dtype=float)
        if np.any(s < 0) or np.any(s > self.perimeter):
            raise ValueError("arclength outside [0, perimeter]")
        scalar = s.ndim == 0
        s = np.atleast_1d(s)
        if self.shape == "circle":
            pos, nrm = self._circle_point(s)
        elif self.shape == "cardioid":
            pos, nrm = self._cardioid_point(s)
        else:
            pos, nrm = self._stadium_point(s)
        pos = pos + np.asarray(self.center)
        if scalar:
            return pos[0], nrm[0]
        return pos, nrm

    def _circle_point(self, s):
        a = self.scale
        phi = s / a
        pos = a * np.stack([np.cos(phi), np.sin(phi)], axis=-1)
        return pos, -pos / a

    def _cardioid_point(self, s):
        a = self.scale
        phi = self._cardioid_angle_from_arclength(s)
        rho = a * (1.0 + np.cos(phi))
        pos = np.stack([rho * np.cos(phi), rho * np.sin(phi)], axis=-1)
        nrm = _cardioid_normal(phi)
        return pos, nrm

    def _cardioid_angle_from_arclength(self, s):
        # s(phi) = 4a sin(phi/2) on [0, pi], mirrored on [pi, 2pi]
        a = self.scale
        s = np.asarray(s, dtype=float)
        first = s <= 4.0 * a
        arg = np.where(first, s, 8.0 * a - s) / (4.0 * a)
        half = np.arcsin(np.clip(arg, 0.0, 1.0))
        return np.where(first, 2.0 * half, 2.0 * math.pi - 2.0 * half)

    def _stadium_point(self, s):
        a = self.scale
        r = a
        pos = np.empty(s.shape + (2,))
        nrm = np.empty_like(pos)
        s0, s1, s2, s3 = 2 * a, 2 * a + math.pi * r, 4 * a + math.pi * r, 4 * a + 2 * math.pi * r
        bottom = s < s0
        right = (s >= s0) & (s < s1)
        top = (s >= s1) & (s < s2)
        left = s >= s2
        pos[bottom] = np.stack([s[bottom] - a, np.full(np.sum(bottom), -r)], axis=-1)
        nrm[bottom] = (0.0, 1.0)
        th = -0.5 * math.pi + (s[right] - s0) / r
        pos[right] = np.stack([a + r * np.cos(th), r * np.sin(th)], axis=-1)
        nrm[right] = np.stack([-np.cos(th), -np.sin(th)], axis=-1)
        pos[top] = np.stack([a - (s[top] - s1), np.full(np.sum(top), r)], axis=-1)
        nrm[top] = (0.0, -1.0)
        th = 0.5 * math.pi + (np.minimum(s[left], s3) - s2) / r
        pos[left] = np.stack([-a + r * np.cos(th), r * np.sin(th)], axis=-1)
        nrm[left] = np.stack([-np.cos(th), -np.sin(th)], axis=-1)
        return pos, nrm

    # -- interior test -------------------------------------------------------

    def contains(self, points, tol: float = 0.0):
        """True for points inside the cavity (tolerance in length units, radial sense)."""
        p = np.asarray(points, dtype=float) - np.asarray(self.center)
        scalar = p.ndim == 1
        p = np.atleast_2d(p)
        a = self.scale
        if self.shape == "circle":
            inside = np.hypot(p[:, 0], p[:, 1]) <= a + tol
        elif self.shape == "cardioid":
            rho = np.hypot(p[:, 0], p[:, 1])
            phi = np.arctan2(p[:, 1], p[:, 0])
            inside = rho <= a * (1.0 + np.cos(phi)) + tol
        else:
            x, y = p[:, 0], p[:, 1]
            in_rect = (np.abs(x) <= a + tol) & (np.abs(y) <= a + tol)
            in_caps = (np.hypot(np.abs(x) - a, y) <= a + tol) & (np.abs(x) > a)
            inside = (in_rect & (np.abs(y) <= a + tol)) | in_caps
        return bool(inside[0]) if scalar else inside

    def opening_contains(self, s):
        """True for arclengths inside the absorbing opening (wraps around)."""
        start = (self.opening_center - 0.5 * self.opening_length) % self.perimeter
        return ((np.asarray(s) - start) % self.perimeter) < self.opening_length

    # -- first collision of a batch of rays ----------------------------------

    def ray_hits(self, pos, dirs):
        """First boundary hit for interior starting points along unit directions.

        Returns ``(dist, s_hit, hit_pos, normal, cusp)`` where ``dist`` is the
        chord length, ``s_hit`` the hit arclength, ``normal`` the inward unit
        normal at the (snapped) hit and ``cusp`` marks hits effectively at the
        cardioid cusp, where no normal exists and the caller should
        retroreflect.  Positions within ``1e-9*scale`` outside the boundary
        are tolerated (they occur transiently in perturbation bookkeeping).
        """
        p = np.atleast_2d(np.asarray(pos, dtype=float)) - np.asarray(self.center)
        d = np.atleast_2d(np.asarray(dirs, dtype=float))
        if self.shape == "circle":
            dist, s_hit, hit, nrm = _circle_hits(p, d, self.scale)
            cusp = np.zeros(len(p), dtype=bool)
        elif self.shape == "stadium":
            dist, s_hit, hit, nrm = _stadium_hits(p, d, self.scale)
            cusp = np.zeros(len(p), dtype=bool)
        else:
            dist, s_hit, hit, nrm, cusp = _cardioid_hits(p, d, self.scale)
        return dist, s_hit, hit + np.asarray(self.center), nrm, cusp


def _cardioid_normal(phi):
    """Inward unit normal of the unit cardioid at polar angle phi."""
    phi = np.asarray(phi, dtype=float)
    c, s = np.cos(phi), np.sin(phi)
    rho, drho = 1.0 + c, -s
    tx = drho * c - rho * s
    ty = drho * s + rho * c
    norm = np.hypot(tx, ty)
    # at the cusp the tangent vanishes; park a +x normal there (callers
    # retroreflect on cusp hits, so this value never steers dynamics)
    safe = norm > 1e-15
    nx = np.where(safe, -ty / np.where(safe, norm, 1.0), 1.0)
    ny = np.where(safe, tx / np.where(safe, norm, 1.0), 0.0)
    return np.stack([nx, ny], axis=-1)


def _circle_hits(p, d, radius):
    b = np.einsum("ij,ij->i", p, d)
    c0 = np.einsum("ij,ij->i", p, p) - radius * radius
    disc = np.maximum(b * b - c0, 0.0)
    dist = -b + np.sqrt(disc)
    hit = p + dist[:, None] * d
    # snap radially onto the circle
    hit *= radius / np.hypot(hit[:, 0], hit[:, 1])[:, None]
    phi = np.arctan2(hit[:, 1], hit[:, 0]) % (2.0 * math.pi)
    s_hit = radius * phi
    nrm = -hit / radius
    return dist, s_hit, hit, nrm


def _stadium_hits(p, d, a):
    n = len(p)
    tau_min = _TAU_MIN * a
    tol = 1e-9 * a
    x, y = p[:, 0], p[:, 1]
    dx, dy = d[:, 0], d[:, 1]
    INF = np.inf
    cand = np.full((4, n), INF)

    # bottom (piece 0) and top (piece 1) straight segments
    for k, ysign in ((0, -1.0), (1, 1.0)):
        with np.errstate(divide="ignore", invalid="ignore"):
            tau = (ysign * a - y) / dy
        xh = x + tau * dx
        ok = (dy != 0) & (tau > tau_min) & (np.abs(xh) <= a + tol)
        cand[k] = np.where(ok, tau, INF)

    # right (piece 2) and left (piece 3) caps
    for k, xsign in ((2, 1.0), (3, -1.0)):
        px = x - xsign * a
        b = px * dx + y * dy
        c0 = px * px + y * y - a * a
        disc = b * b - c0
        ok_disc = disc >= 0
        sq = np.sqrt(np.maximum(disc, 0.0))
        best = np.full(n, INF)
        for tau in (-b - sq, -b + sq):
            xh = px + tau * dx
            ok = ok_disc & (tau > tau_min) & (xsign * xh >= -tol)
            best = np.where(ok & (tau < best), tau, best)
        cand[k] = best

    piece = np.argmin(cand, axis=0)
    dist = cand[piece, np.arange(n)]
    if not np.all(np.isfinite(dist)):
        raise ArithmeticError("stadium ray intersection found no boundary hit")

    hit = p + dist[:, None] * d
    s_hit = np.empty(n)
    nrm = np.empty((n, 2))
    s0, s1, s2 = 2 * a, 2 * a + math.pi * a, 4 * a + math.pi * a

    m = piece == 0
    hit[m, 1] = -a
    s_hit[m] = np.clip(hit[m, 0] + a, 0.0, 2 * a)
    nrm[m] = (0.0, 1.0)
    m = piece == 1
    hit[m, 1] = a
    s_hit[m] = s1 + np.clip(a - hit[m, 0], 0.0, 2 * a)
    nrm[m] = (0.0, -1.0)
    for pc, xsign, s_base in ((2, 1.0, s0), (3, -1.0, s2)):
        m = piece == pc
        if not np.any(m):
            continue
        px = hit[m, 0] - xsign * a
        py = hit[m, 1]
        rr = np.hypot(px, py)
        px, py = a * px / rr, a * py / rr  # snap radially onto the cap
        hit[m, 0] = px + xsign * a
        hit[m, 1] = py
        th = np.arctan2(py, px)
        if pc == 2:
            s_hit[m] = s_base + (th + 0.5 * math.pi) * a
        else:
            th = th % (2.0 * math.pi)  # left-cap angles in [pi/2, 3pi/2]
            s_hit[m] = s_base + (th - 0.5 * math.pi) * a
        nrm[m, 0] = -px / a
        nrm[m, 1] = -py / a
    return dist, s_hit, hit, nrm


def _cardioid_hits(p, d, scale):
    """Quartic ray-cardioid intersection, batch form.

    In units of ``scale`` the boundary is |r| = 1 + cos(angle), equivalently
    (q - x)^2 = q with q = |r|^2 and the physical branch q - x >= 0.  Along
    the ray r(tau) = p + tau*d that is a monic quartic in tau; we take all
    four roots from the companion matrix, polish with Newton, and keep the
    smallest admissible one.
    """
    p = p / scale
    n = len(p)
    b = np.einsum("ij,ij->i", p, d)
    q0 = np.einsum("ij,ij->i", p, p)
    b1 = 2.0 * b - d[:, 0]
    b0 = q0 - p[:, 0]
    # quartic coefficients (monic): tau^4 + c3 tau^3 + c2 tau^2 + c1 tau + c0
    c3 = 2.0 * b1
    c2 = b1 * b1 + 2.0 * b0 - 1.0
    c1 = 2.0 * b1 * b0 - 2.0 * b
    c0 = b0 * b0 - q0

    comp = np.zeros((n, 4, 4))
    comp[:, 1, 0] = comp[:, 2, 1] = comp[:, 3, 2] = 1.0
    comp[:, 0, 3] = -c0
    comp[:, 1, 3] = -c1
    comp[:, 2, 3] = -c2
    comp[:, 3, 3] = -c3
    roots = np.linalg.eigvals(comp)

    tau = roots.real.copy()
    near_real = np.abs(roots.imag) < 1e-6 * np.maximum(1.0, np.abs(tau))
    for _ in range(3):  # Newton polish on the real axis
        P = (((tau + c3[:, None]) * tau + c2[:, None]) * tau + c1[:, None]) * tau + c0[:, None]
        dP = ((4.0 * tau + 3.0 * c3[:, None]) * tau + 2.0 * c2[:, None]) * tau + c1[:, None]
        step = np.where(np.abs(dP) > 1e-300, P / np.where(dP == 0, 1.0, dP), 0.0)
        tau = tau - step
    P = (((tau + c3[:, None]) * tau + c2[:, None]) * tau + c1[:, None]) * tau + c0[:, None]

    g = (tau + b1[:, None]) * tau + b0[:, None]  # q - x along the ray
    admissible = (
        near_real
        & (tau > _TAU_MIN)
        & (g >= -1e-9)
        & (np.abs(P) <= 1e-8 * np.maximum(1.0, tau**4))
    )
    tau = np.where(admissible, tau, np.inf)
    dist = tau.min(axis=1)

    # rays with no admissible root (numerically stuck at the cusp or exactly
    # grazing): treat as a cusp event; the caller will retroreflect in place
    stuck = ~np.isfinite(dist)
    dist = np.where(stuck, 0.0, dist)

    hit = p + dist[:, None] * d
    phi = np.arctan2(hit[:, 1], hit[:, 0]) % (2.0 * math.pi)
    rho_b = 1.0 + np.cos(phi)
    cusp = stuck | (rho_b <= _CUSP_RADIUS)
    hit = np.stack([rho_b * np.cos(phi), rho_b * np.sin(phi)], axis=-1)  # snap
    half = 0.5 * phi
    s_hit = np.where(phi <= math.pi, 4.0 * np.sin(half), 8.0 - 4.0 * np.sin(half))
    nrm = _cardioid_normal(phi)
    return dist * scale, s_hit * scale, hit * scale, nrm, cusp

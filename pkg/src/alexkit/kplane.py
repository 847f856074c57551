"""Closed-form trigonometry on the plane of constant curvature kappa.

Comparison angles from three side lengths and the inverse law of cosines,
for kappa < 0 (hyperbolic), kappa = 0 (Euclidean) and kappa > 0 (spherical).
All functions are pure; kappa is an argument of every call, never global
state, so spaces with different curvature bounds can coexist.

Degenerate-case conventions
---------------------------
Two conventions are in use and are selected by ``degenerate_mode``:

* ``"error"``  -- raise :class:`NoComparisonTriangle` naming the violated
  existence condition (the ordinary comparison-angle convention);
* ``"zero"``   -- return angle 0 when no comparison triangle exists (the
  convention used for comparison angles along unit-speed curves).

A zero-length adjacent side always raises :class:`UndefinedAngle`; no
convention assigns an angle at a collapsed vertex.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NoComparisonTriangle, UndefinedAngle

# Arguments of acos within this distance of +-1 are clamped; float noise at
# flat/degenerate triangles is routine and must not raise.
ACOS_CLAMP = 1e-12

_MODES = ("error", "zero")


@dataclass(frozen=True)
class KappaTriangle:
    """A triangle on the kappa-plane given by its three side lengths.

    Sides are ordered (pq, pr, qr): the first two meet at the vertex p where
    the comparison angle is taken, the third is opposite to it.
    """

    kappa: float
    side_pq: float
    side_pr: float
    side_qr: float

    @property
    def sides(self) -> tuple[float, float, float]:
        return (self.side_pq, self.side_pr, self.side_qr)

    def existence(self) -> tuple[bool, str]:
        """Whether a comparison triangle with these sides exists.

        Returns (flag, reason); reason is "" when the triangle exists.
        Requires nonnegative finite sides and the triangle inequality; for
        kappa > 0 additionally every side <= pi/sqrt(kappa) and perimeter
        <= 2*pi/sqrt(kappa).
        """
        a, b, c = self.sides
        for s in (a, b, c):
            if not math.isfinite(s):
                return False, f"non-finite side {s!r}"
            if s < 0:
                return False, f"negative side {s!r}"
        if c > a + b:
            return False, f"triangle inequality: {c} > {a} + {b}"
        if a > b + c:
            return False, f"triangle inequality: {a} > {b} + {c}"
        if b > a + c:
            return False, f"triangle inequality: {b} > {a} + {c}"
        if self.kappa > 0:
            bound = math.pi / math.sqrt(self.kappa)
            slack = 1e-9
            for s in (a, b, c):
                if s > bound + slack:
                    return False, f"side {s} exceeds pi/sqrt(kappa) = {bound}"
            if a + b + c > 2.0 * bound + slack:
                return False, (
                    f"perimeter {a + b + c} exceeds 2*pi/sqrt(kappa) = {2 * bound}"
                )
        return True, ""


def _clamped_acos(x: float) -> float:
    if x > 1.0:
        if x > 1.0 + ACOS_CLAMP:
            raise DomainError(f"law-of-cosines argument {x} outside [-1, 1]")
        x = 1.0
    elif x < -1.0:
        if x < -1.0 - ACOS_CLAMP:
            raise DomainError(f"law-of-cosines argument {x} outside [-1, 1]")
        x = -1.0
    return math.acos(x)


def _cos_angle(kappa: float, a: float, b: float, c: float) -> float:
    """cos of the angle between sides a, b with c opposite, no validation."""
    if kappa == 0.0:
        return (a * a + b * b - c * c) / (2.0 * a * b)
    if kappa > 0.0:
        s = math.sqrt(kappa)
        denom = math.sin(a * s) * math.sin(b * s)
        if abs(denom) < 1e-14:
            raise UndefinedAngle(
                f"spherical vertex degenerate: sin({a * s}) * sin({b * s}) ~ 0"
            )
        return (math.cos(c * s) - math.cos(a * s) * math.cos(b * s)) / denom
    s = math.sqrt(-kappa)
    denom = math.sinh(a * s) * math.sinh(b * s)
    return (math.cosh(a * s) * math.cosh(b * s) - math.cosh(c * s)) / denom


def comparison_angle(tri: KappaTriangle, degenerate_mode: str = "error") -> float:
    """Angle at the vertex between sides pq and pr, in radians in [0, pi].

    ``degenerate_mode`` selects the convention when no comparison triangle
    exists: "error" raises, "zero" returns 0.0.
    """
    if degenerate_mode not in _MODES:
        raise ValueError(f"degenerate_mode must be one of {_MODES}")
    a, b = tri.side_pq, tri.side_pr
    if a == 0.0 or b == 0.0:
        raise UndefinedAngle("zero-length side adjacent to the angle vertex")
    ok, reason = tri.existence()
    if not ok:
        if degenerate_mode == "zero":
            return 0.0
        raise NoComparisonTriangle(reason)
    try:
        cos_ang = _cos_angle(tri.kappa, a, b, tri.side_qr)
    except UndefinedAngle:
        if degenerate_mode == "zero":
            return 0.0
        raise
    return _clamped_acos(cos_ang)


def side_from_angle(kappa: float, l1: float, l2: float, angle: float) -> float:
    """Third side of the kappa-plane triangle with sides l1, l2 enclosing angle.

    Round-trips with :func:`comparison_angle` to within 1e-9 on nondegenerate
    inputs.
    """
    if l1 < 0 or l2 < 0:
        raise DomainError("side lengths must be nonnegative")
    if not -ACOS_CLAMP <= angle <= math.pi + ACOS_CLAMP:
        raise DomainError(f"angle {angle} outside [0, pi]")
    if kappa == 0.0:
        sq = l1 * l1 + l2 * l2 - 2.0 * l1 * l2 * math.cos(angle)
        return math.sqrt(max(sq, 0.0))
    if kappa > 0.0:
        s = math.sqrt(kappa)
        bound = math.pi / s
        if l1 > bound + 1e-9 or l2 > bound + 1e-9:
            raise DomainError(f"side exceeds pi/sqrt(kappa) = {bound}")
        val = math.cos(l1 * s) * math.cos(l2 * s) + math.sin(l1 * s) * math.sin(
            l2 * s
        ) * math.cos(angle)
        return _clamped_acos(val) / s
    s = math.sqrt(-kappa)
    val = math.cosh(l1 * s) * math.cosh(l2 * s) - math.sinh(l1 * s) * math.sinh(
        l2 * s
    ) * math.cos(angle)
    return math.acosh(max(val, 1.0)) / s


def comparison_angles_array(kappa, a, b, c):
    """Vectorized comparison angles with the "zero" degenerate convention.

    a, b are the sides adjacent to the vertex, c the opposite side; all three
    broadcast together.  Entries whose triangle does not exist (or whose
    spherical denominator vanishes) get angle 0.  Entries with a zero
    adjacent side get NaN; callers decide how to treat them.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    c = np.asarray(c, dtype=float)
    a, b, c = np.broadcast_arrays(a, b, c)
    out = np.zeros(a.shape, dtype=float)

    bad_vertex = (a == 0.0) | (b == 0.0)
    exists = (c <= a + b) & (a <= b + c) & (b <= a + c)
    if kappa > 0:
        s = math.sqrt(kappa)
        bound = math.pi / s + 1e-9
        exists &= (a <= bound) & (b <= bound) & (c <= bound)
        exists &= a + b + c <= 2 * math.pi / s + 1e-9

    sel = exists & ~bad_vertex
    if np.any(sel):
        aa, bb, cc = a[sel], b[sel], c[sel]
        if kappa == 0.0:
            cos_ang = (aa * aa + bb * bb - cc * cc) / (2.0 * aa * bb)
        elif kappa > 0.0:
            s = math.sqrt(kappa)
            denom = np.sin(aa * s) * np.sin(bb * s)
            num = np.cos(cc * s) - np.cos(aa * s) * np.cos(bb * s)
            with np.errstate(divide="ignore", invalid="ignore"):
                cos_ang = np.where(np.abs(denom) < 1e-14, 1.0, num / denom)
        else:
            s = math.sqrt(-kappa)
            denom = np.sinh(aa * s) * np.sinh(bb * s)
            cos_ang = (np.cosh(aa * s) * np.cosh(bb * s) - np.cosh(cc * s)) / denom
        out[sel] = np.arccos(np.clip(cos_ang, -1.0, 1.0))
    out[bad_vertex] = np.nan
    return out

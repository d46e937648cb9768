"""Smooth open arcs parametrized by arclength.

An arc is described by its signed curvature profile ``gamma(s)`` on
``[0, L]``, an initial tangent angle and a base point. The tangent angle
``theta(s) = theta0 + int_0^s gamma`` is available in closed form for every
family, so the arc is unit speed by construction; positions are obtained by
integrating ``(cos theta, sin theta)`` with composite 3-point Gauss-Legendre
(6th order) on panels of width at most ``L / (8 M)``.
"""

from dataclasses import dataclass, field
import math
import re

import numpy as np

from ._validation import check_positive, check_point

FAMILIES = ("segment", "circ", "sine", "rand")


class ArcError(ValueError):
    """Invalid arc parameters or a self-intersecting arc."""


class SelfIntersectionError(ArcError):
    def __init__(self, s1, s2):
        super().__init__(f"arc self-intersects near parameters s={s1:.6g} and s'={s2:.6g}")
        self.pair = (s1, s2)


@dataclass(frozen=True)
class ArcSpec:
    """Curvature-profile description of an open arc.

    ``family`` is one of ``segment``, ``circ`` (constant curvature ``c``),
    ``sine`` (``a sin(2 pi k s / L)``) or ``rand`` (band-limited random
    profile of bandwidth ``bw`` drawn from ``seed``, scaled by ``amp / L``).
    """

    family: str
    length: float
    params: tuple = ()
    theta0: float = 0.0
    base: tuple = (0.0, 0.0)
    _modes: tuple = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ArcError(f"unknown arc family {self.family!r}")
        if not (np.isfinite(self.length) and self.length > 0):
            raise ArcError(f"arc length must be positive and finite, got {self.length}")
        object.__setattr__(self, "params", tuple(sorted(dict(self.params).items())))
        object.__setattr__(self, "base", tuple(float(b) for b in self.base))
        p = self.param_dict
        for name, val in p.items():
            if not np.isfinite(val):
                raise ArcError(f"non-finite curvature parameter {name}={val}")
        if self.family == "circ" and abs(p.get("c", 0.0)) * self.length >= 2 * np.pi:
            raise ArcError(
                f"circular arc with |c|*L = {abs(p['c']) * self.length:.4g} >= 2*pi is not an open arc")
        if self.family == "rand":
            rng = np.random.default_rng(int(p.get("seed", 0)))
            bw = int(p.get("bw", 4))
            if bw < 0:
                raise ArcError("rand bandwidth must be >= 0")
            coef = rng.standard_normal((bw + 1, 2)) / (1.0 + np.arange(bw + 1))[:, None]
            coef = coef * p.get("amp", 1.0) / self.length
            object.__setattr__(self, "_modes", tuple(map(tuple, coef)))

    @property
    def param_dict(self):
        return dict(self.params)

    @property
    def is_segment(self):
        p = self.param_dict
        if self.family == "segment":
            return True
        if self.family == "circ":
            return p.get("c", 0.0) == 0.0
        if self.family == "sine":
            return p.get("a", 0.0) == 0.0
        return p.get("amp", 1.0) == 0.0

    def curvature(self, s):
        s = np.asarray(s, dtype=float)
        p, L = self.param_dict, self.length
        if self.family == "segment":
            return np.zeros_like(s)
        if self.family == "circ":
            return np.full_like(s, p.get("c", 0.0))
        if self.family == "sine":
            w = 2 * np.pi * p.get("k", 1.0) / L
            return p.get("a", 0.0) * np.sin(w * s)
        out = np.zeros_like(s)
        for m, (a, b) in enumerate(self._modes):
            w = 2 * np.pi * m / L
            out += a * np.cos(w * s) + b * np.sin(w * s)
        return out

    def tangent_angle(self, s):
        """theta0 + int_0^s gamma, in closed form."""
        s = np.asarray(s, dtype=float)
        p, L = self.param_dict, self.length
        if self.family == "segment":
            turn = np.zeros_like(s)
        elif self.family == "circ":
            turn = p.get("c", 0.0) * s
        elif self.family == "sine":
            w = 2 * np.pi * p.get("k", 1.0) / L
            turn = p.get("a", 0.0) / w * (1.0 - np.cos(w * s))
        else:
            turn = np.zeros_like(s)
            for m, (a, b) in enumerate(self._modes):
                if m == 0:
                    turn += a * s
                    continue
                w = 2 * np.pi * m / L
                turn += a / w * np.sin(w * s) + b / w * (1.0 - np.cos(w * s))
        return self.theta0 + turn


@dataclass(frozen=True, eq=False)
class ArcGeometry:
    """Arc sampled at parameters ``s`` (points and unit tangents)."""

    s: np.ndarray
    points: np.ndarray
    tangents: np.ndarray
    spec: ArcSpec

    def __post_init__(self):
        for a in (self.s, self.points, self.tangents):
            a.setflags(write=False)

    @property
    def length(self):
        return self.spec.length

    @property
    def n_nodes(self):
        return len(self.s)

    def chord_matrix(self):
        d = self.points[:, None, :] - self.points[None, :, :]
        return np.hypot(d[..., 0], d[..., 1])

    def arclength_matrix(self):
        return np.abs(self.s[:, None] - self.s[None, :])


_GL_X = np.array([-math.sqrt(0.6), 0.0, math.sqrt(0.6)])
_GL_W = np.array([5.0, 8.0, 5.0]) / 9.0


def _integrate_positions(spec, targets, panel):
    """Cumulative int_0^t (cos theta, sin theta) at sorted ``targets``."""
    L = spec.length
    n_uniform = max(1, int(math.ceil(L / panel)))
    breaks = np.union1d(np.linspace(0.0, L, n_uniform + 1), np.clip(targets, 0.0, L))
    a, b = breaks[:-1], breaks[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    x = mid[:, None] + half[:, None] * _GL_X[None, :]
    th = spec.tangent_angle(x)
    wsum = half[:, None] * _GL_W[None, :]
    dx = np.concatenate([[0.0], np.cumsum((wsum * np.cos(th)).sum(axis=1))])
    dy = np.concatenate([[0.0], np.cumsum((wsum * np.sin(th)).sum(axis=1))])
    idx = np.searchsorted(breaks, np.clip(targets, 0.0, L))
    return np.column_stack([dx[idx], dy[idx]]) + np.asarray(spec.base)


def midpoint_nodes(length, n):
    return (np.arange(n) + 0.5) * (length / n)


def _segments_cross(p, q, cand_i, cand_j):
    # proper intersection test of polyline pieces [p_i, q_i] and [p_j, q_j]
    def orient(a, b, c):
        return (b[..., 0] - a[..., 0]) * (c[..., 1] - a[..., 1]) - (b[..., 1] - a[..., 1]) * (c[..., 0] - a[..., 0])

    a, b, c, d = p[cand_i], q[cand_i], p[cand_j], q[cand_j]
    o1, o2 = orient(a, b, c), orient(a, b, d)
    o3, o4 = orient(c, d, a), orient(c, d, b)
    return (o1 * o2 < 0) & (o3 * o4 < 0)


def check_self_intersection(spec, m):
    """Raise SelfIntersectionError if the arc polyline at m+1 points crosses itself."""
    s = np.linspace(0.0, spec.length, m + 1)
    pts = _integrate_positions(spec, s, spec.length / (8 * m))
    p, q = pts[:-1], pts[1:]
    n = len(p)
    for i0 in range(0, n, 256):
        ii = np.arange(i0, min(n, i0 + 256))
        I, J = np.meshgrid(ii, np.arange(n), indexing="ij")
        keep = J > I + 1
        if not keep.any():
            continue
        ci, cj = I[keep], J[keep]
        hit = _segments_cross(p, q, ci, cj)
        hit |= np.hypot(*(pts[ci] - pts[cj]).T) <= 1e-9 * spec.length
        if hit.any():
            k = np.argmax(hit)
            raise SelfIntersectionError(s[ci[k]], s[cj[k]])


def build_arc(spec, nodes, check=True):
    """Realize ``spec`` at ``nodes``.

    ``nodes`` is either an integer M (midpoints of the uniform partition of
    ``[0, L]`` into M cells) or an increasing array of parameters in ``[0, L]``.
    """
    if np.ndim(nodes) == 0:
        m = int(nodes)
        if m < 16:
            raise ArcError(f"need at least 16 nodes, got {m}")
        s = midpoint_nodes(spec.length, m)
    else:
        s = np.asarray(nodes, dtype=float)
        m = len(s)
        if m < 1 or np.any(np.diff(s) <= 0) or s[0] < 0 or s[-1] > spec.length:
            raise ArcError("nodes must be increasing and lie in [0, L]")
    if not np.all(np.isfinite(spec.curvature(s))):
        raise ArcError("non-finite curvature")
    if check:
        check_self_intersection(spec, max(m, 64))
    pts = _integrate_positions(spec, s, spec.length / (8 * max(m, 16)))
    th = spec.tangent_angle(s)
    tan = np.column_stack([np.cos(th), np.sin(th)])
    return ArcGeometry(s=s, points=pts, tangents=tan, spec=spec)


def chord_distance(geom, i, j):
    return float(np.hypot(*(geom.points[i] - geom.points[j])))


def strict_shortening_witness(geom, tol=1e-9):
    """Index pair (i, j) with chord < arclength - tol, or None.

    Returns the pair where the arclength excess over the chord is largest.
    """
    gap = geom.arclength_matrix() - geom.chord_matrix()
    k = int(np.argmax(gap))
    i, j = divmod(k, geom.n_nodes)
    if gap[i, j] > tol:
        return (min(i, j), max(i, j))
    return None


def endpoint_arc_spec(P, Q, bulge):
    """Circular arc from P to Q as an ArcSpec.

    ``bulge = tan(phi / 4)`` where ``phi`` is the signed angle subtended by
    the arc (the DXF convention): 0 is the chord, +-1 a half circle. Positive
    bulge turns left.
    """
    P, Q = check_point(P, "P"), check_point(Q, "Q")
    d = float(np.hypot(*(Q - P)))
    if d == 0.0:
        raise ArcError("endpoints coincide (P = Q)")
    if not np.isfinite(bulge):
        raise ArcError("bulge must be finite")
    phi = 4.0 * math.atan(bulge)
    direction = math.atan2(Q[1] - P[1], Q[0] - P[0])
    if bulge == 0.0:
        return ArcSpec("segment", d, theta0=direction, base=tuple(P))
    radius = d / (2.0 * math.sin(abs(phi) / 2.0))
    length = radius * abs(phi)
    c = math.copysign(1.0 / radius, phi)
    return ArcSpec("circ", length, {"c": c}, theta0=direction - phi / 2.0, base=tuple(P))


def endpoint_family(P, Q, bulge, nodes):
    """Circular arc through fixed endpoints P, Q sampled at ``nodes``."""
    return build_arc(endpoint_arc_spec(P, Q, bulge), nodes)


def endpoint_arc_length(P, Q, bulge):
    return endpoint_arc_spec(P, Q, bulge).length


def endpoints(spec):
    """Exact endpoint positions (s = 0 and s = L)."""
    pts = _integrate_positions(spec, np.array([0.0, spec.length]), spec.length / 8192)
    return pts[0], pts[1]


_KV = re.compile(r"^\s*([A-Za-z_]\w*)\s*=\s*(.+?)\s*$")


def parse_arc(text):
    """ArcSpec from a family string such as ``circ:L=1,c=0.5``.

    Fixed-endpoint arcs use ``endpoints:P=0,0;Q=1,0;bulge=0.3``.
    """
    if ":" not in text:
        raise ArcError(f"arc string {text!r} must look like family:key=value,...")
    family, _, body = text.partition(":")
    family = family.strip()
    if family == "endpoints":
        kv = {}
        for part in body.split(";"):
            m = _KV.match(part)
            if not m:
                raise ArcError(f"cannot parse {part!r} in {text!r}")
            kv[m.group(1)] = m.group(2)
        try:
            P = tuple(float(v) for v in kv.pop("P").split(","))
            Q = tuple(float(v) for v in kv.pop("Q").split(","))
            bulge = float(kv.pop("bulge", 0.0))
        except (KeyError, ValueError) as exc:
            raise ArcError(f"bad endpoints arc {text!r}: {exc}") from None
        if kv:
            raise ArcError(f"unknown keys {sorted(kv)} in {text!r}")
        return endpoint_arc_spec(P, Q, bulge)
    kv = {}
    for part in filter(None, body.split(",")):
        m = _KV.match(part)
        if not m:
            raise ArcError(f"cannot parse {part!r} in {text!r}")
        try:
            kv[m.group(1)] = float(m.group(2))
        except ValueError:
            raise ArcError(f"non-numeric value in {part!r}") from None
    allowed = {"segment": {"L"}, "circ": {"L", "c"}, "sine": {"L", "a", "k"},
               "rand": {"L", "bw", "seed", "amp"}}
    if family not in allowed:
        raise ArcError(f"unknown arc family {family!r}")
    extra = set(kv) - allowed[family] - {"theta0", "x0", "y0"}
    if extra:
        raise ArcError(f"unknown keys {sorted(extra)} for family {family!r}")
    if "L" not in kv:
        raise ArcError(f"arc string {text!r} needs L=")
    length = kv.pop("L")
    theta0 = kv.pop("theta0", 0.0)
    base = (kv.pop("x0", 0.0), kv.pop("y0", 0.0))
    return ArcSpec(family, length, kv, theta0=theta0, base=base)


def format_arc(spec):
    p = ",".join(f"{k}={v:g}" for k, v in spec.params)
    return f"{spec.family}:L={spec.length:g}" + (f",{p}" if p else "")


def segment(length, nodes):
    return build_arc(ArcSpec("segment", check_positive(length, "length")), nodes)

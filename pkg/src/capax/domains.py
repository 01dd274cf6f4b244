"""Convex and concave toric-domain regions and their elementary invariants.

Conventions
-----------
A region sits in the closed positive quadrant, its boundary meeting the
axes in segments [0,a] x {0} and {0} x [0,b].  The remaining boundary
("the upper chain") is stored as a polyline from (0,b) to (a,0) with x
strictly increasing, which is the orientation the weight recursion
consumes.  Convex regions may open with horizontal and close with
vertical chain edges; concave regions are graphs of convex functions
with f(a) = 0, so their chains are strictly monotone in both
coordinates.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

from .errors import (
    AxisContactMissing,
    EmptyDomain,
    MixedBackend,
    NonConvex,
    NotInQuadrant,
    ResolutionTooSmall,
)
from .scalars import (
    Eps,
    Quad,
    backend_of,
    format_scalar,
    parse_scalar,
    primitive_direction,
    seps,
    sfloat,
)

CURVE_FAMILIES = ("quarter_disk", "superellipse")


@dataclass(frozen=True)
class DomainDescriptor:
    """A convex or concave toric-domain region with a numeric backend."""

    kind: str  # "polygon" | "ellipsoid" | "curve" | "weight_list"
    orientation: str | None = None  # "convex" | "concave" (polygons)
    vertices: tuple | None = None
    a: object = None  # ellipsoid legs
    b: object = None
    curve: str | None = None  # curve family name
    params: tuple = ()
    head: object = None  # weight_list head
    weights: tuple = ()
    backend: str = "exact"
    eps: float = 0.0

    @property
    def field_d(self) -> int | None:
        return int(self.backend.split(":")[1]) if self.backend.startswith("sqrt:") else None

    def is_convex(self) -> bool:
        if self.kind == "polygon":
            return self.orientation == "convex"
        if self.kind == "curve":
            return True
        if self.kind == "ellipsoid":
            return True
        return self.head is not None

    def is_concave(self) -> bool:
        if self.kind == "polygon":
            return self.orientation == "concave"
        if self.kind == "ellipsoid":
            return True
        return self.kind == "weight_list" and self.head is None


@dataclass(frozen=True)
class Edge:
    direction: tuple[int, int] | None  # primitive integer vector, None if irrational
    affine_length: object  # zero scalar on irrational-slope edges
    rational_sloped: bool


@dataclass(frozen=True)
class BoundaryProfile:
    """Axis extents and the affine data of the upper boundary."""

    a: object
    b: object
    plus_edges: tuple[Edge, ...]
    total_affine_plus: object
    backend: str
    chain: tuple | None = None  # upper-boundary polyline, (0,b) .. (a,0)
    smooth: bool = False


def polygon(vertices, orientation: str, backend: str = "exact",
            field_d: int | None = None, eps: float = 0.0) -> DomainDescriptor:
    if field_d is not None:
        backend = f"sqrt:{field_d}"
    vs = tuple(
        (parse_scalar(x, _base(backend), _d(backend), eps),
         parse_scalar(y, _base(backend), _d(backend), eps))
        for x, y in vertices
    )
    return DomainDescriptor(kind="polygon", orientation=orientation,
                            vertices=vs, backend=backend, eps=eps)


def ellipsoid(a, b, backend: str = "exact", eps: float = 0.0) -> DomainDescriptor:
    a = parse_scalar(a, _base(backend), _d(backend), eps)
    b = parse_scalar(b, _base(backend), _d(backend), eps)
    return DomainDescriptor(kind="ellipsoid", a=a, b=b, backend=backend, eps=eps)


def ball(a, backend: str = "exact", eps: float = 0.0) -> DomainDescriptor:
    return ellipsoid(a, a, backend=backend, eps=eps)


def square(s, backend: str = "exact", eps: float = 0.0) -> DomainDescriptor:
    s = parse_scalar(s, _base(backend), _d(backend), eps)
    z = s - s
    return DomainDescriptor(kind="polygon", orientation="convex",
                            vertices=((z, z), (s, z), (s, s), (z, s)),
                            backend=backend, eps=eps)


def quarter_disk(r, eps: float = 1e-12) -> DomainDescriptor:
    return DomainDescriptor(kind="curve", curve="quarter_disk",
                            params=(Fraction(r),), backend="float", eps=eps)


def superellipse(p, r, eps: float = 1e-12) -> DomainDescriptor:
    p = Fraction(p)
    if p < 1:
        raise NonConvex("superellipse exponent must be >= 1")
    return DomainDescriptor(kind="curve", curve="superellipse",
                            params=(p, Fraction(r)), backend="float", eps=eps)


def weight_list(head, weights, backend: str = "exact", eps: float = 0.0) -> DomainDescriptor:
    par = lambda v: parse_scalar(v, _base(backend), _d(backend), eps)
    return DomainDescriptor(
        kind="weight_list",
        head=None if head is None else par(head),
        weights=tuple(par(w) for w in weights),
        backend=backend, eps=eps,
    )


def _base(backend: str) -> str:
    return "float" if backend == "float" else ("exact" if backend == "exact" else "exact")


def _d(backend: str) -> int | None:
    return int(backend.split(":")[1]) if backend.startswith("sqrt:") else None


def _zero_of(d: DomainDescriptor):
    if d.backend == "float":
        return Eps(0.0, 0.0)
    if d.field_d is not None:
        return Quad.rational(0, d.field_d)
    return Fraction(0)


def _check_backend_consistency(values, backend: str):
    for v in values:
        if backend_of(v) != backend and not isinstance(v, (int, Fraction)):
            raise MixedBackend(
                f"scalar {v!r} has backend {backend_of(v)}, domain is {backend}")


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------

def _cross(o, p, q):
    return (p[0] - o[0]) * (q[1] - o[1]) - (p[1] - o[1]) * (q[0] - o[0])


def _dedupe_collinear(vs):
    """Drop repeated vertices and interior points of straight runs."""
    out = []
    n = len(vs)
    for i, v in enumerate(vs):
        if out and v[0] == out[-1][0] and v[1] == out[-1][1]:
            continue
        out.append(v)
    if len(out) > 1 and out[0][0] == out[-1][0] and out[0][1] == out[-1][1]:
        out.pop()
    n = len(out)
    keep = []
    for i in range(n):
        if _cross(out[i - 1], out[i], out[(i + 1) % n]) != 0:
            keep.append(out[i])
    return keep


def shoelace_area(vs):
    """Signed area (positive for counterclockwise order)."""
    s = None
    n = len(vs)
    for i in range(n):
        x0, y0 = vs[i]
        x1, y1 = vs[(i + 1) % n]
        t = x0 * y1 - x1 * y0
        s = t if s is None else s + t
    return s / 2


def validate(d: DomainDescriptor) -> BoundaryProfile:
    """Check the descriptor's invariants and return its boundary profile."""
    if d.kind == "polygon":
        return _validate_polygon(d)
    if d.kind == "ellipsoid":
        if not (sfloat(d.a) > 0 and sfloat(d.b) > 0):
            raise EmptyDomain("ellipsoid needs positive legs")
        zero = _zero_of(d)
        chain = ((zero, d.b), (d.a, zero))
        prim, length, rational = primitive_direction(d.a - zero, zero - d.b)
        edge = Edge(prim if rational else None, length if rational else zero, rational)
        return BoundaryProfile(a=d.a, b=d.b, plus_edges=(edge,),
                               total_affine_plus=edge.affine_length if rational else zero,
                               backend=d.backend, chain=chain)
    if d.kind == "curve":
        return _validate_curve(d)
    if d.kind == "weight_list":
        if any(sfloat(w) < 0 for w in d.weights):
            raise EmptyDomain("negative weight")
        if d.head is not None and any(sfloat(w) > sfloat(d.head) for w in d.weights):
            raise NonConvex("head must dominate every weight")
        zero = _zero_of(d)
        return BoundaryProfile(a=None, b=None, plus_edges=(),
                               total_affine_plus=zero, backend=d.backend)
    raise ValueError(f"unknown domain kind {d.kind!r}")


def _validate_polygon(d: DomainDescriptor) -> BoundaryProfile:
    vs = list(d.vertices or ())
    _check_backend_consistency([c for v in vs for c in v], d.backend)
    if len(vs) < 3:
        raise EmptyDomain("polygon needs at least 3 vertices")
    for x, y in vs:
        if sfloat(x) < -seps(x) or sfloat(y) < -seps(y):
            raise NotInQuadrant(f"vertex ({x}, {y}) leaves the positive quadrant")
    vs = _dedupe_collinear(vs)
    if len(vs) < 3:
        raise EmptyDomain("polygon is degenerate after normalization")
    area2 = shoelace_area(vs)
    if sfloat(area2) < 0:
        vs.reverse()
        area2 = -area2
    if not sfloat(area2) > 0:
        raise EmptyDomain("polygon has zero area")

    origin = [i for i, v in enumerate(vs) if not v[0] and not v[1]]
    if not origin:
        raise AxisContactMissing("the origin must be a vertex")
    i0 = origin[0]
    vs = vs[i0:] + vs[:i0]

    if vs[1][1] != 0 or vs[-1][0] != 0:
        # second vertex off the x-axis or last vertex off the y-axis
        raise AxisContactMissing(
            "boundary must leave the origin along the x-axis and return along the y-axis")
    a, b = vs[1][0], vs[-1][1]
    if not (sfloat(a) > 0 and sfloat(b) > 0):
        raise AxisContactMissing("axis contact segments must have positive length")

    chain = list(reversed(vs[1:]))  # (0,b) .. (a,0), upper boundary
    if d.orientation == "convex":
        n = len(vs)
        for i in range(n):
            if sfloat(_cross(vs[i - 1], vs[i], vs[(i + 1) % n])) <= 0:
                raise NonConvex(f"reflex corner at vertex {vs[i]}")
    elif d.orientation == "concave":
        for i in range(len(chain) - 1):
            if not sfloat(chain[i + 1][0] - chain[i][0]) > 0:
                raise NonConvex("upper boundary is not the graph of a function")
            if not sfloat(chain[i][1] - chain[i + 1][1]) > 0:
                raise NonConvex("upper boundary must be strictly decreasing")
        for i in range(len(chain) - 2):
            if sfloat(_cross(chain[i], chain[i + 1], chain[i + 2])) <= 0:
                raise NonConvex("upper boundary is not convex")
    else:
        raise ValueError(f"polygon orientation {d.orientation!r}")

    edges = []
    zero = _zero_of(d)
    total = zero
    for i in range(len(chain) - 1):
        dx = chain[i + 1][0] - chain[i][0]
        dy = chain[i + 1][1] - chain[i][1]
        prim, length, rational = primitive_direction(dx, dy)
        edges.append(Edge(prim if rational else None,
                          length if rational else zero, rational))
        if rational:
            total = total + length
    return BoundaryProfile(a=a, b=b, plus_edges=tuple(edges), total_affine_plus=total,
                           backend=d.backend, chain=tuple(chain))


def _curve_geometry(d: DomainDescriptor):
    """(r, f, fprime, support_11) for the curve family."""
    if d.curve == "quarter_disk":
        (r,) = d.params
        rf = float(r)

        def f(x):
            return math.sqrt(max(rf * rf - x * x, 0.0))

        def fp(x):
            return -x / f(x) if f(x) > 0 else -math.inf

        return rf, f, fp, rf * math.sqrt(2.0)
    if d.curve == "superellipse":
        p, r = d.params
        pf, rf = float(p), float(r)

        def f(x):
            return (max(rf ** pf - x ** pf, 0.0)) ** (1.0 / pf)

        def fp(x):
            y = f(x)
            if y <= 0:
                return -math.inf
            return -((x / y) ** (pf - 1.0)) if x > 0 else 0.0

        # support in direction (1,1): attained on the diagonal
        return rf, f, fp, 2.0 ** (1.0 - 1.0 / pf) * rf
    raise ValueError(f"unknown curve family {d.curve!r}")


def _validate_curve(d: DomainDescriptor) -> BoundaryProfile:
    r = d.params[-1]
    if not r > 0:
        raise EmptyDomain("curve radius must be positive")
    # axis extents are exact (the stored radius); only interior data is fuzzy
    return BoundaryProfile(a=r, b=r, plus_edges=(), total_affine_plus=Fraction(0),
                           backend="float", chain=None, smooth=True)


# ---------------------------------------------------------------------------
# elementary invariants
# ---------------------------------------------------------------------------

def area(d: DomainDescriptor):
    """Euclidean area of the region."""
    if d.kind == "polygon":
        profile = validate(d)
        zero = _zero_of(d)
        vs = [(zero, zero)] + list(reversed(profile.chain))
        return shoelace_area(vs)
    if d.kind == "ellipsoid":
        return d.a * d.b / 2
    if d.kind == "curve":
        if d.curve == "quarter_disk":
            (r,) = d.params
            v = math.pi * float(r) ** 2 / 4
            return Eps(v, d.eps * v + 4e-16 * v)
        p, r = d.params
        pf = float(p)
        v = float(r) ** 2 * math.gamma(1 + 1 / pf) ** 2 / math.gamma(1 + 2 / pf)
        return Eps(v, d.eps * v + 1e-14 * v)
    if d.kind == "weight_list":
        sq = None
        for w in d.weights:
            sq = w * w if sq is None else sq + w * w
        if d.head is not None:
            total = d.head * d.head if sq is None else d.head * d.head - sq
        else:
            total = sq if sq is not None else Fraction(0)
        return total / 2
    raise ValueError(f"unknown domain kind {d.kind!r}")


def circumscribed_head(d: DomainDescriptor):
    """Smallest c with the region inside the triangle of size c: max of x+y."""
    if d.kind == "polygon":
        profile = validate(d)
        if d.orientation != "convex":
            raise NonConvex("circumscribed head needs a convex domain")
        best = None
        for x, y in profile.chain:
            s = x + y
            if best is None or s > best:
                best = s
        return best
    if d.kind == "ellipsoid":
        return d.a if not d.a < d.b else d.b
    if d.kind == "curve":
        _, _, _, sup = _curve_geometry(d)
        return Eps(sup, d.eps * (1 + sup))
    if d.kind == "weight_list":
        if d.head is None:
            raise NonConvex("weight list without a head is concave data")
        return d.head
    raise ValueError(f"unknown domain kind {d.kind!r}")


def inscribed_triangle(d: DomainDescriptor):
    """Largest a with the standard triangle of size a inside the region.

    Equals the minimum of x+y over the upper boundary; exact at vertices
    for polygons, endpoint evaluation plus a sampled certificate for the
    smooth families.
    """
    if d.kind in ("polygon", "ellipsoid"):
        profile = validate(d)
        best = None
        for x, y in profile.chain:
            s = x + y
            if best is None or s < best:
                best = s
        return best
    if d.kind == "curve":
        r, f, _, _ = _curve_geometry(d)
        # x + f(x) is concave here, so the minimum sits at an endpoint
        best = min(r, f(0.0))
        grid = [i * r / 256 for i in range(257)]
        residual = min(x + f(x) for x in grid) - best
        if residual < -1e-9 * (1 + r):
            raise NonConvex("boundary is not concave-function shaped")
        return Eps(best, d.eps * (1 + best) + 1e-12)
    raise EmptyDomain(f"no inscribed triangle for kind {d.kind!r}")


# ---------------------------------------------------------------------------
# inner polygonalization of the smooth families
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class PolygonalizeResult:
    polygon: DomainDescriptor
    hausdorff_bound: float
    introduced_affine_plus: float  # total affine length of the new rational edges


def polygonalize(d: DomainDescriptor, resolution: int) -> PolygonalizeResult:
    """Inner rational-vertex polygon through `resolution` boundary samples."""
    if d.kind != "curve":
        raise ValueError("polygonalize applies to curve families")
    if resolution < 2:
        raise ResolutionTooSmall("resolution must be at least 2")
    r = d.params[-1]
    if d.curve == "quarter_disk":
        pts = _quarter_disk_points(r, resolution)
    else:
        pts = _superellipse_points(d, resolution)
    # pts run x-increasing from (0,r) to (r,0); CCW polygon wants the reverse
    verts = [(Fraction(0), Fraction(0))] + list(reversed(pts))
    poly = DomainDescriptor(kind="polygon", orientation="convex",
                            vertices=tuple(verts), backend="exact")
    profile = validate(poly)
    hb = _hausdorff_bound(d, profile.chain)
    introduced = sum(sfloat(e.affine_length) for e in profile.plus_edges)
    return PolygonalizeResult(polygon=poly, hausdorff_bound=hb,
                              introduced_affine_plus=introduced)


def _quarter_disk_points(r: Fraction, resolution: int):
    """Rational points exactly on the circle via the tangent-half-angle map."""
    pts = []
    for i in range(resolution):
        t = Fraction(i, resolution - 1)
        den = 1 + t * t
        x = r * (1 - t * t) / den
        y = r * 2 * t / den
        pts.append((x, y))
    # pts run from (r,0) to (0,r); return x-increasing (0,r)..(r,0)
    return list(reversed(pts))


def _superellipse_points(d: DomainDescriptor, resolution: int):
    """Rational points inside the curve, snapped downward on a fine grid."""
    p, r = d.params
    _, f, _, _ = _curve_geometry(d)
    den = 4 * resolution * resolution * 1024
    pts = [(Fraction(0), Fraction(r))]
    for i in range(1, resolution - 1):
        x = Fraction(i, resolution - 1) * r
        y = Fraction(math.floor(f(float(x)) * den), den)
        if y <= 0:
            continue
        pts.append((x, y))
    pts.append((Fraction(r), Fraction(0)))
    # upper hull: traversed x-increasing the chain must turn right throughout
    hull = []
    for pt in pts:
        while len(hull) >= 2 and sfloat(_cross(hull[-2], hull[-1], pt)) >= 0:
            hull.pop()
        hull.append(pt)
    return hull


def inner_grid_polygon(d: DomainDescriptor, M: int) -> PolygonalizeResult:
    """Inner approximation on the (r/M)-grid with small coordinate
    denominators, for consumers that feed the weight recursion (simple
    slopes keep the tree small).  The Hausdorff bound carries the extra
    grid offset."""
    if d.kind != "curve":
        raise ValueError("inner_grid_polygon applies to curve families")
    r = d.params[-1]
    _, f, _, _ = _curve_geometry(d)
    rf = float(r)
    pts = [(Fraction(0), Fraction(r))]
    for i in range(1, M):
        x = Fraction(i, M) * r
        y = Fraction(math.floor(f(float(x)) / rf * M), M) * r
        if y <= 0:
            continue
        pts.append((x, y))
    pts.append((Fraction(r), Fraction(0)))
    hull = []
    for pt in pts:
        while len(hull) >= 2 and sfloat(_cross(hull[-2], hull[-1], pt)) >= 0:
            hull.pop()
        hull.append(pt)
    verts = [(Fraction(0), Fraction(0))] + list(reversed(hull))
    poly = DomainDescriptor(kind="polygon", orientation="convex",
                            vertices=tuple(verts), backend="exact")
    profile = validate(poly)
    # arc-to-chord gaps measured on true curve points, plus the grid offset
    _, f, fp, _ = _curve_geometry(d)
    worst = 0.0
    xs = [sfloat(p[0]) for p in hull]
    for x0, x1 in zip(xs, xs[1:]):
        worst = max(worst, _tangent_gap(f, fp, x0, f(x0), x1, f(x1)))
    hb = worst * (1 + 1e-9) + 2 * rf / M
    introduced = sum(sfloat(e.affine_length) for e in profile.plus_edges)
    return PolygonalizeResult(polygon=poly, hausdorff_bound=hb,
                              introduced_affine_plus=introduced)


def _hausdorff_bound(d: DomainDescriptor, chain) -> float:
    """Chord-to-arc bound: the arc between samples stays inside the triangle
    cut by the tangents at the chord's endpoints."""
    _, f, fp, _ = _curve_geometry(d)
    worst = 0.0
    for i in range(len(chain) - 1):
        x0, y0 = sfloat(chain[i][0]), sfloat(chain[i][1])
        x1, y1 = sfloat(chain[i + 1][0]), sfloat(chain[i + 1][1])
        h = _tangent_gap(f, fp, x0, y0, x1, y1)
        worst = max(worst, h)
    return worst * (1 + 1e-9) + 1e-15


def _tangent_gap(f, fp, x0, y0, x1, y1) -> float:
    # distance from the chord to the intersection of the endpoint tangents
    s0, s1 = fp(x0), fp(x1)
    cx, cy = x1 - x0, y1 - y0
    norm = math.hypot(cx, cy)
    if norm == 0:
        return 0.0
    f0, f1 = f(x0), f(x1)
    if not math.isfinite(s0):
        # vertical tangent at x0: intersect x = x0 with tangent at x1
        xi, yi = x0, f1 + s1 * (x0 - x1)
    elif not math.isfinite(s1):
        xi, yi = x1, f0 + s0 * (x1 - x0)
    elif abs(s0 - s1) < 1e-15:
        return 0.0
    else:
        xi = (f1 - f0 + s0 * x0 - s1 * x1) / (s0 - s1)
        yi = f0 + s0 * (xi - x0)
    return abs(cx * (yi - y0) - cy * (xi - x0)) / norm


# ---------------------------------------------------------------------------
# JSON interface
# ---------------------------------------------------------------------------

def descriptor_from_json(obj) -> DomainDescriptor:
    if isinstance(obj, str):
        obj = json.loads(obj)
    kind = obj["kind"]
    field_d = obj.get("field_d")
    backend = obj.get("backend")
    if backend is None:
        backend = f"sqrt:{field_d}" if field_d else "exact"
    eps = float(obj.get("eps", 1e-9 if backend == "float" else 0.0))
    if kind == "polygon":
        return polygon(obj["vertices"], obj.get("orientation", "convex"),
                       backend=backend, eps=eps)
    if kind == "ellipsoid":
        return ellipsoid(obj["a"], obj["b"], backend=backend, eps=eps)
    if kind == "curve":
        name = obj["name"]
        if name == "quarter_disk":
            return quarter_disk(obj["r"], eps=eps)
        if name == "superellipse":
            return superellipse(obj["p"], obj["r"], eps=eps)
        raise ValueError(f"unknown curve family {name!r}")
    if kind == "weight_list":
        return weight_list(obj.get("head"), obj.get("weights", ()),
                           backend=backend, eps=eps)
    raise ValueError(f"unknown domain kind {kind!r}")


def descriptor_to_json(d: DomainDescriptor) -> dict:
    out: dict = {"kind": d.kind}
    if d.field_d is not None:
        out["field_d"] = d.field_d
    if d.backend == "float":
        out["backend"] = "float"
        out["eps"] = d.eps
    if d.kind == "polygon":
        out["orientation"] = d.orientation
        out["vertices"] = [[format_scalar(x), format_scalar(y)] for x, y in d.vertices]
    elif d.kind == "ellipsoid":
        out["a"], out["b"] = format_scalar(d.a), format_scalar(d.b)
    elif d.kind == "curve":
        out["name"] = d.curve
        if d.curve == "quarter_disk":
            out["r"] = format_scalar(d.params[0])
        else:
            out["p"], out["r"] = format_scalar(d.params[0]), format_scalar(d.params[1])
    elif d.kind == "weight_list":
        out["head"] = None if d.head is None else format_scalar(d.head)
        out["weights"] = [format_scalar(w) for w in d.weights]
    return out

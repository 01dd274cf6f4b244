"""Symplectic-embedding obstructions between two toric domains.

Necessary conditions checked, in order: capacity monotonicity
c_k(from) <= c_k(to) for k up to the requested range, volume
monotonicity, and -- when the volumes agree and both domains are
admissible -- the affine-length inequality
a + b + L(from) >= a + b + L(to).  A verdict of OBSTRUCTED requires at
least one strictly violated condition beyond the combined reported
slack; everything else is INCONCLUSIVE (this tool never claims an
embedding exists).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from .errors import NotComparable
from .scalars import seps, sfloat
from .domains import DomainDescriptor, area, validate
from .capacities import series_for_domain
from .weights import TruncationLimits

VOL_RTOL = 1e-9


@dataclass(frozen=True)
class Witness:
    criterion: str  # "capacity" | "volume" | "affine_length"
    k: int | None
    from_value: float
    to_value: float
    slack: float

    def to_json(self) -> dict:
        return {"criterion": self.criterion, "k": self.k,
                "from_value": self.from_value, "to_value": self.to_value,
                "slack": self.slack}


@dataclass
class ObstructionReport:
    verdict: str  # "OBSTRUCTED" | "INCONCLUSIVE"
    witnesses: list[Witness]
    admissible_from: bool
    admissible_to: bool
    vol_from: float
    vol_to: float
    volumes_equal: bool
    notes: list = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        return 2 if self.verdict == "OBSTRUCTED" else 0

    def to_json(self) -> dict:
        return {
            "schema": "capax.obstruction.v1",
            "verdict": self.verdict,
            "witnesses": [w.to_json() for w in self.witnesses],
            "admissible": {"from": self.admissible_from, "to": self.admissible_to},
            "volumes": {"from": self.vol_from, "to": self.vol_to,
                        "equal_within_tolerance": self.volumes_equal},
            "notes": self.notes,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ObstructionReport":
        witnesses = [Witness(criterion=w["criterion"], k=w["k"],
                             from_value=w["from_value"], to_value=w["to_value"],
                             slack=w["slack"]) for w in obj["witnesses"]]
        return cls(verdict=obj["verdict"], witnesses=witnesses,
                   admissible_from=obj["admissible"]["from"],
                   admissible_to=obj["admissible"]["to"],
                   vol_from=obj["volumes"]["from"], vol_to=obj["volumes"]["to"],
                   volumes_equal=obj["volumes"]["equal_within_tolerance"],
                   notes=list(obj.get("notes", [])))


def _is_scaled_lattice(d: DomainDescriptor) -> bool:
    """q * (lattice polygon) for some real q > 0; decidable in exact backends."""
    if d.kind == "ellipsoid":
        # the triangle with legs a, b: lattice type iff b/a is rational
        ratio_ok = _ratio_rational(d.a, d.b)
        return bool(ratio_ok)
    if d.kind != "polygon" or d.backend == "float":
        return False
    from .scalars import rational_parts
    coords = [Fraction(c) if isinstance(c, int) else c
              for v in d.vertices for c in v if sfloat(c) != 0]
    if not coords:
        return False
    q = coords[0]
    try:
        pairs = [rational_parts(c / q) for c in coords]
    except (TypeError, ZeroDivisionError):
        return False
    return all(p2 == 0 for _, p2 in pairs)


def _ratio_rational(a, b) -> bool:
    from .scalars import is_exact, rational_parts
    if not (is_exact(a) and is_exact(b)):
        return False
    try:
        r = b / a
    except TypeError:
        return False
    _, q = rational_parts(r)
    return q == 0


def admissible(d: DomainDescriptor, profile=None) -> bool:
    """Concave, or convex with no rational-sloped upper edges, or convex of
    scaled-lattice type."""
    if d.is_concave():
        return True
    prof = profile if profile is not None else validate(d)
    if prof.smooth or all(not e.rational_sloped for e in prof.plus_edges):
        return True
    return _is_scaled_lattice(d)


def _total_affine_length(d: DomainDescriptor, profile) -> float:
    """a + b + affine length of the rational part of the upper boundary."""
    return sfloat(profile.a) + sfloat(profile.b) + sfloat(profile.total_affine_plus)


def obstruct(dom_from: DomainDescriptor, dom_to: DomainDescriptor, K: int,
             limits: TruncationLimits | None = None) -> ObstructionReport:
    """Collect every certified violation of the necessary conditions."""
    exact_pair = dom_from.backend != "float" and dom_to.backend != "float"
    if dom_from.backend != dom_to.backend and exact_pair:
        if dom_from.field_d is not None and dom_to.field_d is not None \
                and dom_from.field_d != dom_to.field_d:
            raise NotComparable(
                f"backends {dom_from.backend} and {dom_to.backend}: no common field")
    prof_from, prof_to = validate(dom_from), validate(dom_to)
    witnesses: list[Witness] = []
    notes = ["interior vs closed domain is immaterial to these necessary conditions"]

    s_from = series_for_domain(dom_from, K, limits)
    s_to = series_for_domain(dom_to, K, limits)
    guard = 1e-12
    for k in range(min(s_from.kmax, s_to.kmax) + 1):
        lo_from = s_from.lo(k)  # certified lower value for the source
        hi_to = s_to.hi(k)      # certified upper value for the target
        slack = (sfloat(s_from.value(k)) - lo_from) + (hi_to - sfloat(s_to.value(k)))
        if lo_from > hi_to + guard * (1 + abs(hi_to)):
            witnesses.append(Witness("capacity", k, sfloat(s_from.value(k)),
                                     sfloat(s_to.value(k)), slack))
            if len(witnesses) >= 8:
                break

    vol_from, vol_to = area(dom_from), area(dom_to)
    vf, vt = sfloat(vol_from), sfloat(vol_to)
    vol_slack = seps(vol_from) + seps(vol_to) + VOL_RTOL * max(abs(vf), abs(vt), 1.0)
    if vf > vt + vol_slack:
        witnesses.append(Witness("volume", None, vf, vt, vol_slack))
    volumes_equal = abs(vf - vt) <= vol_slack

    adm_from, adm_to = admissible(dom_from, prof_from), admissible(dom_to, prof_to)
    if volumes_equal and adm_from and adm_to:
        lf = _total_affine_length(dom_from, prof_from)
        lt = _total_affine_length(dom_to, prof_to)
        slack = seps(prof_from.total_affine_plus) + seps(prof_to.total_affine_plus) \
            + 1e-12 * (1 + abs(lf) + abs(lt))
        if lf < lt - slack:
            witnesses.append(Witness("affine_length", None, lf, lt, slack))
    elif volumes_equal and not (adm_from and adm_to):
        notes.append("equal volumes but inadmissible domain: affine-length "
                     "criterion not applied")

    verdict = "OBSTRUCTED" if witnesses else "INCONCLUSIVE"
    return ObstructionReport(verdict=verdict, witnesses=witnesses,
                             admissible_from=adm_from, admissible_to=adm_to,
                             vol_from=vf, vol_to=vt, volumes_equal=volumes_equal,
                             notes=notes)

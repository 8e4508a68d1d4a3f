"""Faraid distribution over a twelve-relation heir taxonomy.

The pipeline is blocking, fixed shares, residue, then one of the two
proportional adjustments (ʿawl when fixed shares exceed the estate, radd when
they fall short and nobody takes the residue). Every constant comes from the
jurisprudence parameter file; only the control flow lives here.

All arithmetic is ``fractions.Fraction``; shares always sum to exactly 1.
"""

from __future__ import annotations

import json
from collections.abc import Iterable, Mapping
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction

from ..clients import ChatClient, call_model, extract_json_object
from ..errors import ExtractionIncomplete, InvalidInput, NoHeirs, UnsupportedRelation
from .params import JurisprudenceParams, default_params


class Relation(str, Enum):
    HUSBAND = "husband"
    WIFE = "wife"
    SON = "son"
    DAUGHTER = "daughter"
    FATHER = "father"
    MOTHER = "mother"
    PATERNAL_GRANDFATHER = "paternal_grandfather"
    GRANDMOTHER = "grandmother"
    FULL_BROTHER = "full_brother"
    FULL_SISTER = "full_sister"
    SON_OF_SON = "son_of_son"
    DAUGHTER_OF_SON = "daughter_of_son"


class Adjustment(str, Enum):
    AWL = "awl"
    RADD = "radd"
    BLOCKING = "blocking"


MALE = frozenset({"husband", "son", "father", "paternal_grandfather", "full_brother", "son_of_son"})
SPOUSES = ("husband", "wife")
DESCENDANTS = ("son", "daughter", "son_of_son", "daughter_of_son")
# blockers are resolved before the heirs they may exclude
_BLOCKING_ORDER = ("son_of_son", "daughter_of_son", "paternal_grandfather", "grandmother", "full_brother", "full_sister")


def _relation(value) -> Relation:
    try:
        return Relation(value)
    except ValueError:
        raise UnsupportedRelation(f"unsupported relation: {value!r}") from None


@dataclass(frozen=True)
class EstateSpec:
    estate_value: Fraction
    heirs: tuple[tuple[Relation, int], ...]

    @classmethod
    def build(cls, heirs: Mapping[str, int] | Iterable[tuple[str, int]], estate_value=1) -> "EstateSpec":
        """Accept a mapping or a multiset of (relation, count) pairs; repeats are summed."""
        pairs = heirs.items() if isinstance(heirs, Mapping) else heirs
        counts: dict[Relation, int] = {}
        for rel, count in pairs:
            rel = _relation(rel)
            if isinstance(count, bool) or not isinstance(count, int) or count <= 0:
                raise InvalidInput(f"count for {rel.value} must be a positive integer, got {count!r}")
            counts[rel] = counts.get(rel, 0) + count
        ordered = tuple((r, counts[r]) for r in Relation if r in counts)
        return cls(Fraction(estate_value), ordered)

    def count(self, relation: Relation | str) -> int:
        relation = _relation(relation)
        return next((c for r, c in self.heirs if r is relation), 0)

    def validate(self, params: JurisprudenceParams | None = None) -> None:
        params = params or default_params()
        if self.estate_value <= 0:
            raise InvalidInput("estate value must be positive")
        if not self.heirs:
            raise NoHeirs("at least one heir is required")
        for rel, count in self.heirs:
            _relation(rel)
            limit = params.max_counts.get(rel.value)
            if limit is not None and count > limit:
                raise InvalidInput(f"at most {limit} {rel.value} allowed, got {count}")
        if self.count(Relation.HUSBAND) and self.count(Relation.WIFE):
            raise InvalidInput("husband and wife cannot both be heirs of one estate")


@dataclass(frozen=True)
class ShareAllocation:
    shares: Mapping[Relation, Fraction]
    adjustments_applied: frozenset[Adjustment]
    trace: tuple[str, ...]

    def per_head(self, spec: EstateSpec) -> dict[Relation, Fraction]:
        return {rel: share / spec.count(rel) for rel, share in self.shares.items()}

    def amounts(self, spec: EstateSpec) -> dict[Relation, Fraction]:
        return {rel: share * spec.estate_value for rel, share in self.shares.items()}

    def to_dict(self) -> dict:
        return {
            "shares": {rel.value: f"{s.numerator}/{s.denominator}" for rel, s in self.shares.items()},
            "adjustments_applied": sorted(a.value for a in self.adjustments_applied),
            "trace": list(self.trace),
        }


def _frac(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}"


def compute_inheritance(spec: EstateSpec, params: JurisprudenceParams | None = None) -> ShareAllocation:
    p = params or default_params()
    spec.validate(p)
    n = {rel.value: count for rel, count in spec.heirs}
    present = set(n)
    policy = p.policies
    table = p.fixed_shares
    ratio = p.male_to_female_ratio
    trace: list[str] = []
    adjustments: set[Adjustment] = set()

    # (1) blocking
    blocking = {rel: list(bs) for rel, bs in p.blocking.items()}
    if policy.get("grandfather_with_siblings") == "block":
        for sibling in ("full_brother", "full_sister"):
            blocking.setdefault(sibling, []).append("paternal_grandfather")
    blocked: dict[str, list[str]] = {}
    for rel in _BLOCKING_ORDER:
        if rel not in present:
            continue
        blockers = [b for b in blocking.get(rel, ()) if b in present and b not in blocked]
        if blockers:
            blocked[rel] = blockers
            trace.append(f"blocking: {rel} excluded by {', '.join(blockers)}")
    if (
        "daughter_of_son" in present
        and "daughter_of_son" not in blocked
        and n.get("daughter", 0) >= 2
        and "son_of_son" not in present
    ):
        blocked["daughter_of_son"] = ["daughter"]
        trace.append("blocking: daughter_of_son excluded by two or more daughters (the 2/3 is exhausted)")
    if blocked:
        adjustments.add(Adjustment.BLOCKING)

    def active(rel: str) -> bool:
        return rel in present and rel not in blocked

    has_desc = any(active(r) for r in DESCENDANTS)
    female_desc = active("daughter") or active("daughter_of_son")
    if policy.get("blocked_siblings_reduce_mother", True):
        sibling_count = n.get("full_brother", 0) + n.get("full_sister", 0)
    else:
        sibling_count = sum(n[r] for r in ("full_brother", "full_sister") if active(r))
    sharing = (
        policy.get("grandfather_with_siblings") == "share"
        and active("paternal_grandfather")
        and (active("full_brother") or active("full_sister"))
    )

    # (2) fixed shares
    fixed: dict[str, Fraction] = {}

    def assign(rel: str, share: Fraction, why: str) -> None:
        fixed[rel] = share
        trace.append(f"fixed: {rel} {_frac(share)} ({why})")

    for spouse in SPOUSES:
        if active(spouse):
            key = "with_descendant" if has_desc else "without_descendant"
            assign(spouse, table[spouse][key], key.replace("_", " "))
    spouse_share = sum((fixed[s] for s in SPOUSES if s in fixed), Fraction(0))

    if active("daughter") and not active("son"):
        key = "single" if n["daughter"] == 1 else "plural"
        assign("daughter", table["daughter"][key], f"{key}, no son")
    if active("daughter_of_son") and not active("son_of_son"):
        if n.get("daughter", 0) == 0:
            key = "single" if n["daughter_of_son"] == 1 else "plural"
            assign("daughter_of_son", table["daughter_of_son"][key], f"{key}, no daughter or son's son")
        else:
            assign("daughter_of_son", table["daughter_of_son"]["with_one_daughter"], "completes 2/3 with one daughter")
    if active("father") and has_desc:
        assign("father", table["father"]["with_descendant"], "descendant present")
    if active("paternal_grandfather") and has_desc and not sharing:
        assign("paternal_grandfather", table["paternal_grandfather"]["with_descendant"], "descendant present")
    if active("mother"):
        shares = table["mother"]
        if has_desc or sibling_count >= 2:
            assign("mother", shares["reduced"], "descendant present" if has_desc else "two or more siblings")
        elif policy.get("umariyyatan", True) and active("father") and spouse_share:
            assign("mother", shares["third_of_remainder"] * (1 - spouse_share), "umariyya: third of what remains after the spouse")
        else:
            assign("mother", shares["full"], "no descendant, fewer than two siblings")
    if active("grandmother"):
        assign("grandmother", table["grandmother"]["any"], "mother absent")
    if active("full_sister") and not active("full_brother") and not female_desc and not sharing:
        key = "single" if n["full_sister"] == 1 else "plural"
        assign("full_sister", table["full_sister"][key], f"{key}, no brother or daughter")

    # (3) residue
    residue: dict[str, Fraction] = {}
    if sharing:
        akdariyya = _akdariyya(n, active, policy, table, trace)
        if akdariyya is not None:
            return _finish(akdariyya, n, {Adjustment.AWL, *adjustments}, trace)
        _grandfather_with_siblings(n, active, fixed, residue, table, ratio, trace)
    else:
        group = _residuary_group(p.residuary_order, active)
        if group is None and active("full_sister") and female_desc and not active("full_brother"):
            group = ["full_sister"]
            trace.append("residue: full_sister becomes residuary alongside the daughters")
        if group is not None:
            remainder = 1 - sum(fixed.values(), Fraction(0))
            if remainder > 0:
                units = {rel: n[rel] * (ratio if rel in MALE else 1) for rel in group}
                total_units = sum(units.values())
                for rel in group:
                    residue[rel] = remainder * units[rel] / total_units
                    trace.append(f"residue: {rel} takes {_frac(residue[rel])}")
            else:
                for rel in group:
                    residue[rel] = Fraction(0)
                    trace.append(f"residue: nothing remains for {rel}")

    shares = {rel: fixed.get(rel, Fraction(0)) + residue.get(rel, Fraction(0)) for rel in set(fixed) | set(residue)}
    total = sum(shares.values(), Fraction(0))

    # (4) ʿawl / (5) radd
    if total > 1:
        adjustments.add(Adjustment.AWL)
        trace.append(f"awl: shares sum to {_frac(total)}; each scaled by {_frac(1 / total)}")
        shares = {rel: s / total for rel, s in shares.items()}
    elif total < 1 and not residue:
        adjustments.add(Adjustment.RADD)
        shares = _radd(shares, total, policy, trace)

    return _finish(shares, n, adjustments, trace)


def _residuary_group(order, active) -> list[str] | None:
    for group in order:
        if active(group[0]):
            return [rel for rel in group if active(rel)]
    return None


def _akdariyya(n, active, policy, table, trace) -> dict[str, Fraction] | None:
    heirs = {rel for rel in n if active(rel)}
    if not policy.get("akdariyya", True):
        return None
    if heirs != {"husband", "mother", "paternal_grandfather", "full_sister"} or n["full_sister"] != 1:
        return None
    husband = table["husband"]["without_descendant"]
    mother = table["mother"]["full"]
    grandfather = table["paternal_grandfather"]["floor_with_siblings"]
    sister = table["full_sister"]["single"]
    total = husband + mother + grandfather + sister
    joint = (grandfather + sister) / total
    trace.append(
        f"akdariyya: husband {_frac(husband)}, mother {_frac(mother)}, paternal_grandfather {_frac(grandfather)}, "
        f"full_sister {_frac(sister)}; awl over {_frac(total)}, then grandfather and sister pool {_frac(joint)} at 2:1"
    )
    return {
        "husband": husband / total,
        "mother": mother / total,
        "paternal_grandfather": joint * 2 / 3,
        "full_sister": joint / 3,
    }


def _grandfather_with_siblings(n, active, fixed, residue, table, ratio, trace) -> None:
    """Grandfather takes the best of sharing as a brother, a third, or a sixth."""
    others = sum(fixed.values(), Fraction(0))
    remainder = 1 - others
    gf_table = table["paternal_grandfather"]
    floor, third = gf_table["floor_with_siblings"], gf_table["third"]
    siblings = [rel for rel in ("full_brother", "full_sister") if active(rel)]
    units = {rel: n[rel] * (ratio if rel in MALE else 1) for rel in siblings}
    total_units = ratio + sum(units.values())
    shared = remainder * ratio / total_units
    if others == 0:
        options = {"sharing": shared, "third of the estate": third}
    else:
        options = {"sharing": shared, "third of the remainder": remainder * third, "sixth of the estate": floor}
    if others and remainder <= floor:
        fixed["paternal_grandfather"] = floor
        trace.append(f"grandfather: takes {_frac(floor)}; nothing remains for the siblings")
        for rel in siblings:
            residue[rel] = Fraction(0)
        return
    best_name = max(options, key=lambda k: (options[k], k == "sharing"))
    best = options[best_name]
    residue["paternal_grandfather"] = best
    trace.append(
        "grandfather: "
        + ", ".join(f"{k} = {_frac(v)}" for k, v in options.items())
        + f"; takes {best_name} {_frac(best)}"
    )
    left = remainder - best
    sibling_units = sum(units.values())
    for rel in siblings:
        residue[rel] = left * units[rel] / sibling_units
        trace.append(f"residue: {rel} takes {_frac(residue[rel])}")


def _radd(shares, total, policy, trace) -> dict[str, Fraction]:
    remainder = 1 - total
    recipients = {rel: s for rel, s in shares.items() if rel not in SPOUSES and s > 0}
    if not recipients:
        spouses = [rel for rel in shares if rel in SPOUSES]
        if not spouses or not policy.get("radd_to_spouse_when_alone", True):
            raise InvalidInput("no heir can receive the unallocated remainder")
        trace.append(f"radd: remainder {_frac(remainder)} returned to {spouses[0]} (no other heir)")
        return {**shares, spouses[0]: shares[spouses[0]] + remainder}
    pool = sum(recipients.values(), Fraction(0))
    out = dict(shares)
    for rel, s in recipients.items():
        out[rel] = s + remainder * s / pool
    trace.append(f"radd: remainder {_frac(remainder)} returned to {', '.join(sorted(recipients))} in proportion to their shares")
    return out


def _finish(shares: dict[str, Fraction], n, adjustments, trace) -> ShareAllocation:
    result = {rel: shares.get(rel.value, Fraction(0)) for rel in Relation if rel.value in n}
    total = sum(result.values(), Fraction(0))
    if total != 1:
        raise AssertionError(f"shares sum to {total}, not 1")  # engine invariant
    return ShareAllocation(result, frozenset(adjustments), tuple(trace))


# ---------------------------------------------------------------------------
# parameter extraction

INHERITANCE_EXTRACTION_PROMPT = (
    "Extract the inheritance case from the user's message. Reply with one JSON object: "
    '{"estate_value": number or null, "heirs": {"<relation>": count}} where relation is one of '
    + ", ".join(r.value for r in Relation)
    + ". Include only heirs the user mentions; never guess."
)


def extract_estate_spec(text: str, model_client: ChatClient) -> EstateSpec:
    if not text or not text.strip():
        raise InvalidInput("query is empty")
    messages = [{"role": "system", "content": INHERITANCE_EXTRACTION_PROMPT}, {"role": "user", "content": text}]
    try:
        reply = extract_json_object(call_model(model_client, messages))
    except (ValueError, json.JSONDecodeError) as exc:
        raise ExtractionIncomplete(["heirs"], f"could not read extractor reply: {exc}") from exc
    except Exception as exc:  # noqa: BLE001
        raise ExtractionIncomplete(["heirs"], f"extractor unavailable: {exc}") from exc
    heirs = reply.get("heirs") or {}
    if not isinstance(heirs, dict) or not heirs:
        raise ExtractionIncomplete(["heirs"])
    estate = reply.get("estate_value")
    from .zakat import parse_amount

    try:
        value = parse_amount(estate) if estate is not None else Fraction(1)
    except ValueError:
        raise ExtractionIncomplete(["estate_value"]) from None
    if value <= 0:
        raise ExtractionIncomplete(["estate_value"])
    try:
        return EstateSpec.build({k: int(v) for k, v in heirs.items()}, value)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, UnsupportedRelation):
            raise
        raise ExtractionIncomplete(["heirs"], str(exc)) from exc

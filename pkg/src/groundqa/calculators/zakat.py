"""Zakat over monetary, gold, silver and trade-goods holdings."""

from __future__ import annotations

import json
import re
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from enum import Enum
from fractions import Fraction

from ..clients import ChatClient, call_model, extract_json_object
from ..errors import ExtractionIncomplete, InvalidInput
from .params import JurisprudenceParams, default_params, present


class AssetClass(str, Enum):
    MONETARY = "monetary"
    GOLD = "gold"
    SILVER = "silver"
    TRADE_GOODS = "trade_goods"


@dataclass(frozen=True)
class ZakatInput:
    assets: tuple[tuple[AssetClass, Fraction], ...]
    nisab_table: Mapping[AssetClass, Fraction]
    hawl_satisfied: bool
    rate_table: Mapping[AssetClass, Fraction]

    @classmethod
    def build(
        cls,
        assets: Sequence[tuple[str | AssetClass, object]],
        *,
        hawl_satisfied: bool,
        nisab: Mapping[str | AssetClass, object] | None = None,
        rates: Mapping[str | AssetClass, object] | None = None,
        params: JurisprudenceParams | None = None,
    ) -> "ZakatInput":
        """Assemble an input, filling nisab/rate gaps from the parameter file."""
        params = params or default_params()
        nisab_table = dict(params.zakat_nisab)
        nisab_table.update({AssetClass(k): Fraction(str(v)) for k, v in (nisab or {}).items()})
        rate_table = dict(params.zakat_rates)
        rate_table.update({AssetClass(k): Fraction(str(v)) for k, v in (rates or {}).items()})
        return cls(
            assets=tuple((AssetClass(c), Fraction(str(a))) for c, a in assets),
            nisab_table=nisab_table,
            hawl_satisfied=bool(hawl_satisfied),
            rate_table=rate_table,
        )


@dataclass(frozen=True)
class ZakatResult:
    per_class_due: tuple[tuple[AssetClass, Fraction], ...]
    total_due: Fraction
    explanation: tuple[str, ...] = field(default=())

    def presented(self) -> dict[str, str]:
        out = {c.value: str(present(d)) for c, d in self.per_class_due}
        out["total"] = str(present(self.total_due))
        return out


def _fmt(x: Fraction) -> str:
    return str(x.numerator) if x.denominator == 1 else f"{x.numerator}/{x.denominator}"


def compute_zakat(zakat_input: ZakatInput) -> ZakatResult:
    holdings: dict[AssetClass, Fraction] = {}
    for asset_class, amount in zakat_input.assets:
        if amount < 0:
            raise InvalidInput(f"negative amount for {asset_class.value}: {amount}")
        if asset_class not in zakat_input.nisab_table:
            raise InvalidInput(f"no nisab configured for {asset_class.value}")
        if asset_class not in zakat_input.rate_table:
            raise InvalidInput(f"no rate configured for {asset_class.value}")
        holdings[asset_class] = holdings.get(asset_class, Fraction(0)) + amount

    dues = []
    notes = []
    for asset_class, amount in holdings.items():
        nisab = zakat_input.nisab_table[asset_class]
        rate = zakat_input.rate_table[asset_class]
        name = asset_class.value
        if amount < nisab:
            notes.append(f"nisab check: {name} holding {_fmt(amount)} is below nisab {_fmt(nisab)}; nothing due")
            dues.append((asset_class, Fraction(0)))
            continue
        notes.append(f"nisab check: {name} holding {_fmt(amount)} meets nisab {_fmt(nisab)}")
        if not zakat_input.hawl_satisfied:
            notes.append(f"hawl check: {name} not held for a full lunar year; nothing due")
            dues.append((asset_class, Fraction(0)))
            continue
        notes.append(f"hawl check: {name} held for a full lunar year")
        due = amount * rate
        notes.append(f"rate applied: {name} {_fmt(amount)} x {_fmt(rate)} = {_fmt(due)}")
        dues.append((asset_class, due))
    total = sum((d for _, d in dues), Fraction(0))
    return ZakatResult(tuple(dues), total, tuple(notes))


# ---------------------------------------------------------------------------
# parameter extraction

ZAKAT_EXTRACTION_PROMPT = (
    "Extract zakat parameters from the user's message. Reply with one JSON object: "
    '{"assets": [{"asset_class": "monetary|gold|silver|trade_goods", "amount": number}], '
    '"hawl_satisfied": true|false|null, "nisab": {"<asset_class>": number} or null, '
    '"gold_price_per_gram": number or null, "currency": string or null}. '
    "Use null for anything the user did not state. Never guess amounts."
)

_THOUSANDS = re.compile(r"(?<=\d)[,٬](?=\d{3}\b)")


def parse_amount(value) -> Fraction:
    """Accept JSON numbers or numeric strings ("10,000", "١٠٠٠٠", "2.5")."""
    if isinstance(value, bool) or value is None:
        raise ValueError(f"not an amount: {value!r}")
    if isinstance(value, (int, float)):
        return Fraction(str(value))
    text = str(value).strip().translate({0x0660 + i: str(i) for i in range(10)})
    text = _THOUSANDS.sub("", text).replace("٫", ".")
    try:
        return Fraction(Decimal(text))
    except (InvalidOperation, ValueError) as exc:
        raise ValueError(f"not an amount: {value!r}") from exc


def extract_zakat_params(text: str, model_client: ChatClient, params: JurisprudenceParams | None = None) -> ZakatInput:
    if not text or not text.strip():
        raise InvalidInput("query is empty")
    params = params or default_params()
    messages = [{"role": "system", "content": ZAKAT_EXTRACTION_PROMPT}, {"role": "user", "content": text}]
    try:
        reply = extract_json_object(call_model(model_client, messages))
    except (ValueError, json.JSONDecodeError) as exc:
        raise ExtractionIncomplete(["amount", "hawl_satisfied"], f"could not read extractor reply: {exc}") from exc
    except Exception as exc:  # noqa: BLE001 - extractor outage => ask the user
        raise ExtractionIncomplete(["amount", "hawl_satisfied"], f"extractor unavailable: {exc}") from exc

    missing: list[str] = []
    assets: list[tuple[AssetClass, Fraction]] = []
    raw_assets = reply.get("assets") or []
    if not isinstance(raw_assets, list):
        raw_assets = []
    for i, entry in enumerate(raw_assets):
        if not isinstance(entry, dict):
            missing.append(f"assets[{i}]")
            continue
        try:
            asset_class = AssetClass(entry.get("asset_class"))
        except ValueError:
            missing.append(f"assets[{i}].asset_class")
            continue
        try:
            amount = parse_amount(entry.get("amount"))
        except ValueError:
            missing.append(f"assets[{i}].amount")
            continue
        if amount < 0:
            missing.append(f"assets[{i}].amount")
            continue
        assets.append((asset_class, amount))
    if not assets and not missing:
        missing.append("amount")

    hawl = reply.get("hawl_satisfied")
    if not isinstance(hawl, bool):
        missing.append("hawl_satisfied")

    nisab: dict[AssetClass, Fraction] = {}
    for key, value in (reply.get("nisab") or {}).items():
        try:
            nisab[AssetClass(key)] = parse_amount(value)
        except ValueError:
            missing.append(f"nisab.{key}")
    gold_price = reply.get("gold_price_per_gram")
    for asset_class in {c for c, _ in assets}:
        if asset_class in nisab or asset_class in params.zakat_nisab:
            continue
        if gold_price is not None:
            try:
                price = parse_amount(gold_price)
            except ValueError:
                missing.append("gold_price_per_gram")
                continue
            if price > 0:
                nisab[asset_class] = price * params.monetary_nisab_gold_grams
                continue
        missing.append(f"nisab.{asset_class.value}")

    if missing:
        raise ExtractionIncomplete(sorted(set(missing), key=missing.index))
    return ZakatInput.build(assets, hawl_satisfied=hawl, nisab=nisab, params=params)

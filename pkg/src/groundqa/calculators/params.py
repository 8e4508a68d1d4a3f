from __future__ import annotations

import logging
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from functools import lru_cache
from pathlib import Path
from typing import Any, Mapping

from ..config import checksum, data_path, load_json

log = logging.getLogger(__name__)


def present(amount: Fraction) -> Decimal:
    """Round an exact amount for display: half-even to 2 decimal places."""
    cents = round(Fraction(amount) * 100)  # Fraction.__round__ is half-even
    return Decimal(cents).scaleb(-2)


@dataclass(frozen=True)
class JurisprudenceParams:
    version: str
    zakat_rates: Mapping[Any, Fraction]
    zakat_nisab: Mapping[Any, Fraction]
    monetary_nisab_gold_grams: Fraction
    fixed_shares: Mapping[str, Mapping[str, Fraction]]
    blocking: Mapping[str, tuple[str, ...]]
    residuary_order: tuple[tuple[str, ...], ...]
    male_to_female_ratio: int
    max_counts: Mapping[str, int]
    policies: Mapping[str, Any]
    checksum: str = ""

    @classmethod
    def from_dict(cls, raw: Mapping[str, Any], digest: str = "") -> "JurisprudenceParams":
        from .zakat import AssetClass

        zakat = raw["zakat"]
        inh = raw["inheritance"]
        policy = dict(inh.get("policies", {}))
        if policy.get("grandfather_with_siblings", "share") not in {"share", "block"}:
            raise ValueError("grandfather_with_siblings must be 'share' or 'block'")
        return cls(
            version=raw.get("version", "unversioned"),
            zakat_rates={AssetClass(k): Fraction(v) for k, v in zakat["rates"].items()},
            zakat_nisab={AssetClass(k): Fraction(v) for k, v in zakat.get("nisab", {}).items()},
            monetary_nisab_gold_grams=Fraction(zakat.get("monetary_nisab_gold_grams", "85")),
            fixed_shares={rel: {k: Fraction(v) for k, v in table.items()} for rel, table in inh["fixed_shares"].items()},
            blocking={rel: tuple(bs) for rel, bs in inh["blocking"].items()},
            residuary_order=tuple(tuple(group) for group in inh["residuary_order"]),
            male_to_female_ratio=int(inh.get("male_to_female_ratio", 2)),
            max_counts=dict(inh.get("max_counts", {})),
            policies=policy,
            checksum=digest,
        )

    @classmethod
    def load(cls, path: str = "jurisprudence.json") -> "JurisprudenceParams":
        raw = load_json(path)
        resolved = Path(path) if Path(path).exists() else data_path(path)
        digest = checksum(resolved)
        log.info("jurisprudence parameters %s sha256=%s", raw.get("version"), digest)
        return cls.from_dict(raw, digest)


@lru_cache(maxsize=1)
def default_params() -> JurisprudenceParams:
    return JurisprudenceParams.load()

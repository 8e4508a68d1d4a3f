"""Deterministic jurisprudential calculators (zakat and inheritance)."""

from .inheritance import (
    Adjustment,
    EstateSpec,
    Relation,
    ShareAllocation,
    compute_inheritance,
    extract_estate_spec,
)
from .params import JurisprudenceParams, default_params, present
from .zakat import AssetClass, ZakatInput, ZakatResult, compute_zakat, extract_zakat_params

__all__ = [
    "Adjustment",
    "AssetClass",
    "EstateSpec",
    "JurisprudenceParams",
    "Relation",
    "ShareAllocation",
    "ZakatInput",
    "ZakatResult",
    "compute_inheritance",
    "compute_zakat",
    "default_params",
    "extract_estate_spec",
    "extract_zakat_params",
    "present",
]

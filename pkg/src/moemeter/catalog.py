"""Device capability catalog: peak bandwidth, FLOPS, TDP, price, memory.

Catalog files are JSON lists, one record per device. The shipped
``catalog/default.json`` covers edge, low-power, workstation and datacenter
classes; vendor figures there are data with per-entry source notes, not
claims this package asserts. Multi-GPU systems appear as single entries
with summed bandwidth/TDP and ``aggregate: true``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .errors import ValidationError

DEVICE_CLASSES = ("edge", "low_power", "workstation", "datacenter")
MEMORY_TIERS = ("HBM", "DRAM", "SSD")


@dataclass(frozen=True)
class HardwareSpec:
    name: str
    device_class: str
    peak_bandwidth_gbps: float
    tdp_watts: float
    price_usd: float
    peak_flops_by_precision: dict[str, float] = field(default_factory=dict)
    memory_gb: dict[str, float] = field(default_factory=dict)
    offload_bandwidth_gbps: float | None = None
    aggregate: bool = False
    source_note: str = ""

    def __post_init__(self):
        if self.device_class not in DEVICE_CLASSES:
            raise ValidationError(
                f"device {self.name!r}: device_class must be one of {DEVICE_CLASSES}",
                field="device_class",
            )
        for fname in ("peak_bandwidth_gbps", "tdp_watts", "price_usd"):
            if getattr(self, fname) < 0:
                raise ValidationError(f"device {self.name!r}: {fname} must be >= 0", field=fname)
        for prec, flops in self.peak_flops_by_precision.items():
            if flops < 0:
                raise ValidationError(
                    f"device {self.name!r}: peak FLOPS for {prec!r} must be >= 0",
                    field="peak_flops_by_precision",
                )
        for tier, gb in self.memory_gb.items():
            if tier not in MEMORY_TIERS:
                raise ValidationError(
                    f"device {self.name!r}: unknown memory tier {tier!r}", field="memory_gb"
                )
            if gb < 0:
                raise ValidationError(
                    f"device {self.name!r}: memory size for {tier!r} must be >= 0", field="memory_gb"
                )
        if self.offload_bandwidth_gbps is not None:
            if self.offload_bandwidth_gbps < 0:
                raise ValidationError(
                    f"device {self.name!r}: offload bandwidth must be >= 0",
                    field="offload_bandwidth_gbps",
                )
            if self.offload_bandwidth_gbps > self.peak_bandwidth_gbps:
                raise ValidationError(
                    f"device {self.name!r}: offload bandwidth exceeds peak bandwidth",
                    field="offload_bandwidth_gbps",
                )


def spec_from_dict(doc: Mapping) -> HardwareSpec:
    try:
        return HardwareSpec(**doc)
    except TypeError as exc:
        raise ValidationError(f"bad catalog record ({exc})", field="record") from None


def load_catalog(source: str | Path | Sequence[Mapping]) -> list[HardwareSpec]:
    """Load and validate a catalog; duplicate device names are rejected."""
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    else:
        doc = list(source)
    if not isinstance(doc, list):
        raise ValidationError("catalog must be a JSON list of device records", field="catalog")
    specs = [spec_from_dict(rec) for rec in doc]
    seen: set[str] = set()
    for spec in specs:
        if spec.name in seen:
            raise ValidationError(f"duplicate device name {spec.name!r}", field="name")
        seen.add(spec.name)
    return specs


def serialize_catalog(specs: Iterable[HardwareSpec]) -> str:
    return json.dumps([asdict(s) for s in specs], indent=2, sort_keys=True) + "\n"


def get_device(catalog: Sequence[HardwareSpec], name: str) -> HardwareSpec:
    for spec in catalog:
        if spec.name == name:
            return spec
    raise ValidationError(f"device {name!r} not in catalog", field="device")


def filter_devices(
    catalog: Sequence[HardwareSpec],
    device_class: str | None = None,
    min_bandwidth_gbps: float | None = None,
    max_tdp_watts: float | None = None,
    max_price_usd: float | None = None,
) -> list[HardwareSpec]:
    """Filter by class / bandwidth / power / price; stable (class, name) order."""
    out = []
    for spec in catalog:
        if device_class is not None and spec.device_class != device_class:
            continue
        if min_bandwidth_gbps is not None and spec.peak_bandwidth_gbps < min_bandwidth_gbps:
            continue
        if max_tdp_watts is not None and spec.tdp_watts > max_tdp_watts:
            continue
        if max_price_usd is not None and spec.price_usd > max_price_usd:
            continue
        out.append(spec)
    out.sort(key=lambda s: (DEVICE_CLASSES.index(s.device_class), s.name))
    return out

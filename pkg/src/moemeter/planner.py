"""Deployment planning: bandwidth/OPS requirements, feasibility, batch sweeps.

Turns a model descriptor, an activation assumption and a latency target
into hardware requirements. Theoretical bandwidth is the bytes a decode
step must move divided by the TPOT target; the practical requirement
divides by an achievable-utilization efficiency (a fraction in (0, 1]),
since real systems never sustain a device's peak.

Activation modes:

* ``batch1_analytic`` - one token activates exactly top_k + shared experts.
* ``full_activation`` - every expert in every layer is read (large-batch bound).
* ``trace`` - byte footprint taken from a recorded activation sheet.
* ``expected`` - per-layer expected distinct experts for a given batch size
  and routing distribution.

The headline recipe shipped with this repo (see README) evaluates the two
bounding modes at 1 byte/param with a default efficiency divisor of 0.3558
and a 0.1 s/token target; both assumptions are inferred conventions,
overridable per run. GB means 1e9 bytes throughout.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Sequence

from .catalog import HardwareSpec
from .errors import ValidationError
from .metrics import activated_bytes_for_pass
from .models import (
    ModelDescriptor,
    Precision,
    active_param_bytes_analytic,
    activated_params_from_counts,
    total_param_bytes,
    total_params,
    sparse_flops_per_token,
)
from .trace import ActivationSheet, RoutingDistribution, expected_distinct_experts

GB = 1e9

ACTIVATION_MODES = ("batch1_analytic", "full_activation", "trace", "expected")

# Default assumptions for the shipped bandwidth-requirement recipe. The
# efficiency divisor is an inferred convention, not a measured constant.
DEFAULT_EFFICIENCY_MBU = 0.3558
DEFAULT_SLO_TPOT_S = 0.1


@dataclass(frozen=True)
class SloSpec:
    """Latency service-level objective: seconds per output token."""

    tpot_s: float

    def __post_init__(self):
        if self.tpot_s <= 0:
            raise ValidationError("tpot_s must be > 0", field="tpot_s")


@dataclass(frozen=True)
class DeploymentRequirement:
    model_name: str
    activation_mode: str
    tpot_s: float
    bytes_per_param: float
    kv_bytes: float
    theoretical_bandwidth_gbps: float
    practical_bandwidth_gbps: float
    efficiency_mbu: float
    theoretical_ops: float | None = None
    practical_ops: float | None = None
    efficiency_mfu: float | None = None


def theoretical_bandwidth_gbps(
    desc: ModelDescriptor,
    prec: Precision,
    slo: SloSpec,
    activation_mode: str,
    kv_bytes: float = 0.0,
    sheet: ActivationSheet | None = None,
    batch: int | None = None,
    dist: RoutingDistribution | None = None,
    include_embed: bool = True,
) -> float:
    """Minimum bandwidth (GB/s) to move one decode step's bytes within the
    TPOT target, under the chosen activation assumption."""
    if activation_mode not in ACTIVATION_MODES:
        raise ValidationError(
            f"activation_mode must be one of {ACTIVATION_MODES}", field="activation_mode"
        )
    if kv_bytes < 0:
        raise ValidationError("kv_bytes must be >= 0", field="kv_bytes")
    if activation_mode == "batch1_analytic":
        step_bytes = active_param_bytes_analytic(desc, prec, include_embed=include_embed)
    elif activation_mode == "full_activation":
        step_bytes = total_param_bytes(desc, prec, include_embed=include_embed)
    elif activation_mode == "trace":
        if sheet is None:
            raise ValidationError("trace mode requires an activation sheet", field="sheet")
        per_pass = [
            activated_bytes_for_pass(rec, desc, prec, include_embed=include_embed)
            + rec.kv_bytes_read
            for rec in sheet.passes
        ]
        step_bytes = sum(per_pass) / len(per_pass)
    else:  # expected
        if batch is None or dist is None:
            raise ValidationError("expected mode requires batch and dist", field="batch")
        expected = expected_distinct_experts(desc.n_expert, desc.top_k, batch, dist)
        step_bytes = (
            activated_params_from_counts(desc, expected.value, include_embed=include_embed)
            * prec.bytes_per_param
        )
    return (step_bytes + kv_bytes) / slo.tpot_s / GB


def practical_bandwidth(theoretical_gbps: float, s_mbu_efficiency: float) -> float:
    """Requirement after dividing by the achievable bandwidth utilization."""
    if not 0 < s_mbu_efficiency <= 1:
        raise ValidationError("efficiency must be in (0, 1]", field="s_mbu_efficiency")
    return theoretical_gbps / s_mbu_efficiency


def practical_ops(theoretical_ops: float, s_mfu_efficiency: float) -> float:
    """Requirement after dividing by the achievable compute utilization."""
    if not 0 < s_mfu_efficiency <= 1:
        raise ValidationError("efficiency must be in (0, 1]", field="s_mfu_efficiency")
    return theoretical_ops / s_mfu_efficiency


def plan_requirement(
    desc: ModelDescriptor,
    prec: Precision,
    slo: SloSpec,
    activation_mode: str,
    efficiency_mbu: float = DEFAULT_EFFICIENCY_MBU,
    kv_bytes: float = 0.0,
    sheet: ActivationSheet | None = None,
    batch: int | None = None,
    dist: RoutingDistribution | None = None,
    include_ops: bool = False,
    efficiency_mfu: float | None = None,
    seq_len: int = 1,
    include_embed: bool = True,
) -> DeploymentRequirement:
    theoretical = theoretical_bandwidth_gbps(
        desc,
        prec,
        slo,
        activation_mode,
        kv_bytes=kv_bytes,
        sheet=sheet,
        batch=batch,
        dist=dist,
        include_embed=include_embed,
    )
    theo_ops = prac_ops = eff_mfu = None
    if include_ops:
        eff_mfu = efficiency_mfu if efficiency_mfu is not None else efficiency_mbu
        per_token = sparse_flops_per_token(desc, seq_len)
        theo_ops = per_token * (batch if batch else 1) / slo.tpot_s
        prac_ops = practical_ops(theo_ops, eff_mfu)
    return DeploymentRequirement(
        model_name=desc.name,
        activation_mode=activation_mode,
        tpot_s=slo.tpot_s,
        bytes_per_param=prec.bytes_per_param,
        kv_bytes=kv_bytes,
        theoretical_bandwidth_gbps=theoretical,
        practical_bandwidth_gbps=practical_bandwidth(theoretical, efficiency_mbu),
        efficiency_mbu=efficiency_mbu,
        theoretical_ops=theo_ops,
        practical_ops=prac_ops,
        efficiency_mfu=eff_mfu,
    )


# --------------------------------------------------------------------------
# Feasibility
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DeviceVerdict:
    name: str
    device_class: str
    tdp_watts: float
    price_usd: float
    bandwidth_gbps: float
    bandwidth_ok: bool
    ops_ok: bool | None
    satisfied: bool
    used_offload: bool


def feasibility(
    requirement: DeploymentRequirement,
    catalog: Sequence[HardwareSpec],
    use_offload: bool = False,
    margin: float = 0.0,
    ops_precision: str = "fp16",
) -> list[DeviceVerdict]:
    """Per-device verdicts against a requirement, sorted by TDP then price.

    ``margin`` relaxes the requirement by the given fraction (a device
    passes when its bandwidth >= requirement * (1 - margin)); the default 0
    demands the requirement outright. With ``use_offload`` the device's
    offload bandwidth is used where present.
    """
    if not catalog:
        raise ValidationError("catalog is empty", field="catalog")
    if not 0 <= margin < 1:
        raise ValidationError("margin must be in [0, 1)", field="margin")
    need_bw = requirement.practical_bandwidth_gbps * (1.0 - margin)
    verdicts = []
    for spec in catalog:
        used_offload = use_offload and spec.offload_bandwidth_gbps is not None
        bw = spec.offload_bandwidth_gbps if used_offload else spec.peak_bandwidth_gbps
        bw_ok = bw >= need_bw
        ops_ok: bool | None = None
        if requirement.practical_ops is not None:
            peak = spec.peak_flops_by_precision.get(ops_precision)
            ops_ok = peak is not None and peak >= requirement.practical_ops * (1.0 - margin)
        verdicts.append(
            DeviceVerdict(
                name=spec.name,
                device_class=spec.device_class,
                tdp_watts=spec.tdp_watts,
                price_usd=spec.price_usd,
                bandwidth_gbps=bw,
                bandwidth_ok=bw_ok,
                ops_ok=ops_ok,
                satisfied=bw_ok and (ops_ok is not False),
                used_offload=used_offload,
            )
        )
    verdicts.sort(key=lambda v: (v.tdp_watts, v.price_usd))
    return verdicts


# --------------------------------------------------------------------------
# Batch sweeps
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SweepPoint:
    batch: int
    expected_distinct_per_layer: float
    expected_activated_fraction: float
    theoretical_bandwidth_gbps: float
    practical_bandwidth_gbps: float
    feasible_devices: tuple[str, ...]


def batch_sweep(
    desc: ModelDescriptor,
    dist: RoutingDistribution,
    batches: Sequence[int],
    slo: SloSpec,
    prec: Precision,
    efficiency_mbu: float = DEFAULT_EFFICIENCY_MBU,
    catalog: Sequence[HardwareSpec] | None = None,
    use_offload: bool = False,
    margin: float = 0.0,
    include_embed: bool = True,
) -> list[SweepPoint]:
    """Expected-activation requirement and feasibility per batch size.

    The bandwidth column is non-decreasing in batch and bounded by the
    batch-1 analytic and full-activation requirements.
    """
    if list(batches) != sorted(batches):
        raise ValidationError("batches must be sorted ascending", field="batches")
    total = total_params(desc)
    points = []
    for batch in batches:
        expected = expected_distinct_experts(desc.n_expert, desc.top_k, batch, dist)
        act_params = activated_params_from_counts(desc, expected.value, include_embed=include_embed)
        theoretical = act_params * prec.bytes_per_param / slo.tpot_s / GB
        prac = practical_bandwidth(theoretical, efficiency_mbu)
        feas: tuple[str, ...] = ()
        if catalog:
            req = DeploymentRequirement(
                model_name=desc.name,
                activation_mode="expected",
                tpot_s=slo.tpot_s,
                bytes_per_param=prec.bytes_per_param,
                kv_bytes=0.0,
                theoretical_bandwidth_gbps=theoretical,
                practical_bandwidth_gbps=prac,
                efficiency_mbu=efficiency_mbu,
            )
            feas = tuple(
                v.name for v in feasibility(req, catalog, use_offload=use_offload, margin=margin) if v.satisfied
            )
        points.append(
            SweepPoint(
                batch=batch,
                expected_distinct_per_layer=expected.value,
                expected_activated_fraction=act_params / total,
                theoretical_bandwidth_gbps=theoretical,
                practical_bandwidth_gbps=prac,
                feasible_devices=feas,
            )
        )
    return points


# --------------------------------------------------------------------------
# Bandwidth-vs-power map (plot data)
# --------------------------------------------------------------------------

def bandwidth_power_map(
    desc: ModelDescriptor,
    prec: Precision,
    slo: SloSpec,
    catalog: Sequence[HardwareSpec],
    efficiency_mbu: float = DEFAULT_EFFICIENCY_MBU,
    include_embed: bool = True,
) -> dict:
    """Plot data for the bandwidth-vs-power map: one point per device (TDP,
    peak and offload bandwidth) and two horizontal requirement lines for the
    model (batch-1 activation and full activation)."""
    lines = []
    for mode in ("batch1_analytic", "full_activation"):
        req = plan_requirement(
            desc, prec, slo, mode, efficiency_mbu=efficiency_mbu, include_embed=include_embed
        )
        lines.append(
            {
                "activation_mode": mode,
                "theoretical_bandwidth_gbps": req.theoretical_bandwidth_gbps,
                "practical_bandwidth_gbps": req.practical_bandwidth_gbps,
            }
        )
    devices = [
        {
            "name": s.name,
            "device_class": s.device_class,
            "tdp_watts": s.tdp_watts,
            "peak_bandwidth_gbps": s.peak_bandwidth_gbps,
            "offload_bandwidth_gbps": s.offload_bandwidth_gbps,
            "aggregate": s.aggregate,
        }
        for s in catalog
    ]
    return {
        "model": desc.name,
        "assumptions": {
            "bytes_per_param": prec.bytes_per_param,
            "tpot_slo_s": slo.tpot_s,
            "efficiency_mbu": efficiency_mbu,
            "include_embed": include_embed,
        },
        "requirement_lines": lines,
        "devices": devices,
    }


def requirement_to_dict(req: DeploymentRequirement) -> dict:
    return asdict(req)


def verdicts_to_dicts(verdicts: Sequence[DeviceVerdict]) -> list[dict]:
    return [asdict(v) for v in verdicts]

from __future__ import annotations

import json

import pytest
from hypothesis import given, settings, strategies as st

from moemeter.costing import (
    BillOfMaterials,
    DeploymentEconomics,
    PowerProfile,
    cost_per_token,
    cost_report,
    energy_cost_kwh,
    load_cost_inputs,
    power_profile_from_tdp,
    purchase_cost,
)
from moemeter.errors import ValidationError

HOURS_PER_YEAR = 8760.0


def test_purchase_all_zero():
    assert purchase_cost(BillOfMaterials(0, 0, 0, 0, 0)) == 0.0


def test_purchase_176k_server():
    # 8-GPU training-style server shape: GPU-heavy with CPU/DRAM headroom
    bom = BillOfMaterials(
        gpu_usd=120_000, cpu_usd=10_000, motherboard_usd=6_000, dram_usd=30_000, ssd_usd=10_000
    )
    assert purchase_cost(bom) == 176_000.0


def test_purchase_20k_downgrade_delta():
    full = BillOfMaterials(120_000, 10_000, 6_000, 30_000, 10_000)
    lean = BillOfMaterials(120_000, 5_000, 6_000, 15_000, 10_000)
    assert purchase_cost(full) - purchase_cost(lean) == 20_000.0
    assert purchase_cost(lean) == 156_000.0


def test_negative_bom_entry_rejected():
    with pytest.raises(ValidationError, match="dram_usd"):
        BillOfMaterials(1, 1, 1, -1, 1)


def test_informational_decomposition_must_fit_line_items():
    with pytest.raises(ValidationError):
        BillOfMaterials(
            gpu_usd=100, cpu_usd=0, motherboard_usd=10, dram_usd=0, ssd_usd=0, hbm_usd=150
        )
    with pytest.raises(ValidationError, match="PCIe"):
        BillOfMaterials(
            gpu_usd=100, cpu_usd=0, motherboard_usd=10, dram_usd=0, ssd_usd=0, pcie_usd=20
        )
    # consistent decomposition is fine
    BillOfMaterials(
        gpu_usd=100, cpu_usd=20, motherboard_usd=10, dram_usd=5, ssd_usd=5,
        hbm_usd=60, nvlink_usd=20, chip_to_memory_usd=10, pcie_usd=10,
    )


def test_energy_hand_arithmetic():
    power = PowerProfile(gpu_watts=400, cpu_watts=100)
    assert energy_cost_kwh(power, HOURS_PER_YEAR) == pytest.approx(4380.0)


def test_energy_zero_power():
    assert energy_cost_kwh(PowerProfile(0, 0), 100.0) == 0.0


def test_cpu_share_of_draw_can_rival_gpu():
    # CPU-assist deployments: a 280 W CPU next to a 300 W GPU is ~48% of draw
    power = PowerProfile(gpu_watts=300, cpu_watts=280)
    assert power.cpu_watts / power.total_watts == pytest.approx(0.483, abs=0.001)


def test_cost_per_token_worked_example():
    # $10,000 hardware, 500 W for a year at $0.1/kWh, 1000 tok/s
    bom = BillOfMaterials(8_000, 1_000, 500, 300, 200)
    assert purchase_cost(bom) == 10_000.0
    power = PowerProfile(gpu_watts=400, cpu_watts=100)
    econ = DeploymentEconomics(
        runtime_hours=HOURS_PER_YEAR, energy_price_usd_per_kwh=0.1, token_throughput_tps=1000.0
    )
    tokens = 1000.0 * HOURS_PER_YEAR * 3600.0
    assert tokens == pytest.approx(3.1536e10)
    value = cost_per_token(bom, power, econ)
    assert value == pytest.approx((10_000 + 438.0) / 3.1536e10, rel=1e-12)
    assert value == pytest.approx(3.31e-7, rel=5e-3)


def test_zero_energy_price_reduces_to_hardware_term():
    bom = BillOfMaterials(10_000, 0, 0, 0, 0)
    power = PowerProfile(500, 0)
    econ = DeploymentEconomics(1000.0, 0.0, 100.0)
    assert cost_per_token(bom, power, econ) == pytest.approx(
        10_000 / (100.0 * 1000.0 * 3600.0), rel=1e-12
    )


def test_longer_runtime_decreases_cost_when_hardware_dominates():
    bom = BillOfMaterials(10_000, 0, 0, 0, 0)
    power = PowerProfile(100, 0)
    price = 0.1
    # energy cost per hour (0.01 $/h) far below amortized hardware per hour
    c1 = cost_per_token(bom, power, DeploymentEconomics(1000.0, price, 100.0))
    c2 = cost_per_token(bom, power, DeploymentEconomics(2000.0, price, 100.0))
    assert c2 < c1


def test_amortization_limit_is_energy_floor():
    bom = BillOfMaterials(10_000, 0, 0, 0, 0)
    power = PowerProfile(500, 0)
    price = 0.12
    tps = 250.0
    econ = DeploymentEconomics(1e10, price, tps)
    floor = (power.total_watts / 1000.0 * price) / (tps * 3600.0)
    assert cost_per_token(bom, power, econ) == pytest.approx(floor, rel=1e-4)


@given(st.floats(0, 1e6), st.floats(0, 1e6), st.floats(1e-3, 1e6))
@settings(max_examples=60, deadline=None)
def test_linearity(gpu, cpu, runtime):
    bom = BillOfMaterials(gpu, cpu, 0, 0, 0)
    double = BillOfMaterials(2 * gpu, 2 * cpu, 0, 0, 0)
    assert purchase_cost(double) == pytest.approx(2 * purchase_cost(bom), rel=1e-12, abs=1e-9)
    p = PowerProfile(gpu_watts=gpu, cpu_watts=cpu)
    assert energy_cost_kwh(p, 2 * runtime) == pytest.approx(
        2 * energy_cost_kwh(p, runtime), rel=1e-12, abs=1e-9
    )


def test_cost_identity_totals():
    # C_token * tokens == purchase + energy dollars, exactly
    bom = BillOfMaterials(5_000, 1_000, 400, 200, 100)
    power = PowerProfile(350, 120, 15, 10, 5)
    econ = DeploymentEconomics(5_000.0, 0.15, 800.0)
    tokens = econ.token_throughput_tps * econ.runtime_hours * 3600.0
    lhs = cost_per_token(bom, power, econ) * tokens
    rhs = purchase_cost(bom) + energy_cost_kwh(power, econ.runtime_hours) * 0.15
    assert lhs == pytest.approx(rhs, rel=1e-12)


def test_power_profile_from_tdp_default_factor():
    profile = power_profile_from_tdp(450.0)
    assert profile.gpu_watts == pytest.approx(270.0)
    with pytest.raises(ValidationError):
        power_profile_from_tdp(450.0, utilization=1.5)


def test_economics_validation():
    with pytest.raises(ValidationError, match="runtime_hours"):
        DeploymentEconomics(0.0, 0.1, 100.0)
    with pytest.raises(ValidationError, match="token throughput"):
        DeploymentEconomics(10.0, 0.1, 0.0)


def test_cost_inputs_file_roundtrip(tmp_path):
    doc = {
        "bill_of_materials": {
            "gpu_usd": 8000,
            "cpu_usd": 1000,
            "motherboard_usd": 500,
            "dram_usd": 300,
            "ssd_usd": 200,
        },
        "power_profile": {"gpu_watts": 400, "cpu_watts": 100},
        "economics": {
            "runtime_hours": 8760,
            "energy_price_usd_per_kwh": 0.1,
            "token_throughput_tps": 1000,
        },
    }
    path = tmp_path / "inputs.json"
    path.write_text(json.dumps(doc))
    bom, power, econ = load_cost_inputs(path)
    report = cost_report(bom, power, econ)
    assert report["purchase_usd"] == 10_000
    assert report["energy_kwh"] == pytest.approx(4380.0)
    assert report["cost_per_token_usd"] == pytest.approx(3.31e-7, rel=5e-3)


def test_cost_inputs_missing_section(tmp_path):
    path = tmp_path / "inputs.json"
    path.write_text(json.dumps({"bill_of_materials": {}}))
    with pytest.raises(ValidationError, match="power_profile"):
        load_cost_inputs(path)

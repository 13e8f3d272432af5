from __future__ import annotations

from pathlib import Path

import pytest

from moemeter.models import ModelDescriptor, Precision, load_model_descriptor

REPO_ROOT = Path(__file__).resolve().parent.parent


@pytest.fixture(scope="session")
def repo_root() -> Path:
    return REPO_ROOT


@pytest.fixture(scope="session")
def models_dir(repo_root) -> Path:
    return repo_root / "models"


@pytest.fixture(scope="session")
def catalog_path(repo_root) -> Path:
    return repo_root / "catalog" / "default.json"


@pytest.fixture(scope="session")
def traces_dir(repo_root) -> Path:
    return repo_root / "traces"


@pytest.fixture(scope="session")
def rules_path(repo_root) -> Path:
    return repo_root / "rules" / "decision_matrix.json"


@pytest.fixture(scope="session")
def bundles_dir(repo_root) -> Path:
    return repo_root / "bundles"


@pytest.fixture(scope="session")
def r1_desc(models_dir) -> ModelDescriptor:
    return load_model_descriptor(models_dir / "deepseek-r1.json")


@pytest.fixture(scope="session")
def mixtral7b_desc(models_dir) -> ModelDescriptor:
    return load_model_descriptor(models_dir / "mixtral-8x7b.json")


@pytest.fixture(scope="session")
def toy_desc(models_dir) -> ModelDescriptor:
    return load_model_descriptor(models_dir / "toy-4x2.json")


@pytest.fixture(scope="session")
def int8() -> Precision:
    return Precision(1.0)


@pytest.fixture(scope="session")
def fp16() -> Precision:
    return Precision(2.0)


def make_desc(**overrides) -> ModelDescriptor:
    """Small MoE descriptor with every field overridable."""
    base = dict(
        name="test-model",
        n_layer=2,
        moe_layer_mask=(True, True),
        d_model=64,
        n_heads=4,
        n_kv_heads=2,
        head_dim=16,
        n_expert=4,
        top_k=2,
        n_shared=0,
        params_expert=1_000_000,
        params_shared_expert=0,
        params_router=10_000,
        params_attn_layer=2_000_000,
        params_dense_ffn=0,
        params_embed=1_000_000,
    )
    base.update(overrides)
    return ModelDescriptor(**base)

"""Published reference values shipped with the package (read-only)."""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from importlib import resources

from .scaling import PowerLawFit


@dataclass(frozen=True)
class ModelScaleRecord:
    name: str
    depths: tuple[int | None, ...]
    channels: tuple[int, ...]
    entropy_blocks_s1_s2: tuple[int | None, ...]
    entropy_blocks_s3: tuple[int | None, ...]
    params_millions: float

    def __post_init__(self):
        if not self.params_millions > 0:
            raise ValueError("params_millions must be positive")

    @property
    def params_billions(self) -> float:
        return self.params_millions / 1000.0


@lru_cache(maxsize=None)
def load_reference() -> dict:
    text = resources.files("rdlab").joinpath("data/reference.json").read_text()
    return json.loads(text)


def model_scales() -> list[ModelScaleRecord]:
    return [
        ModelScaleRecord(
            r["name"], tuple(r["depths"]), tuple(r["channels"]),
            tuple(r["entropy_blocks_s1_s2"]), tuple(r["entropy_blocks_s3"]),
            float(r["params_millions"]),
        )
        for r in load_reference()["model_scales"]
    ]


def size_law() -> PowerLawFit:
    d = load_reference()["size_law"]
    return PowerLawFit(d["gamma"], d["alpha_exp"], None, d["pearson_r"], 5)


def compute_law() -> PowerLawFit:
    d = load_reference()["compute_law"]
    return PowerLawFit(d["gamma"], d["alpha_exp"], None, float("nan"), 5)

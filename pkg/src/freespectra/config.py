"""Tolerances and run knobs shared by every pipeline."""
from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path


@dataclass(frozen=True)
class ToolConfig:
    tol_herm: float = 1e-9
    tol_psd: float = 1e-8
    tol_pd: float = 1e-10
    tol_rank: float = 1e-9
    tol_det: float = 1e-10
    tol_cert: float = 1e-6
    tol_obj: float = 1e-6
    tol_feas: float = 1e-9
    tol_gap: float = 1e-9
    eps_gns: float = 1e-5
    seed: int = 0
    max_level: int = 3
    trials: int = 2000
    boundary_trials: int = 12
    consistency_samples: int = 500
    max_iter: int = 100
    max_block_dim: int = 400
    max_constraints: int = 5000
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for f in dataclasses.fields(self):
            if f.name.startswith(("tol_", "eps_")) and not getattr(self, f.name) > 0:
                raise ValueError(f"tolerance {f.name} must be positive")

    def replace(self, **kw) -> "ToolConfig":
        return dataclasses.replace(self, **kw)

    @classmethod
    def from_dict(cls, data: dict) -> "ToolConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def load(cls, path: str | Path) -> "ToolConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


DEFAULT = ToolConfig()

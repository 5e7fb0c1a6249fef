"""Run configuration shared by the CLI and the scripts."""
from __future__ import annotations

import json
import os
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

from .errors import ConfigError
from .ffm import GridSpec
from .geometry import ANCHOR_SETS
from .presets import GRID_PRESETS, HFM_SELECTIONS, grid_preset, published_grid
from .solvers import SolverConfig

OUTPUT_ENV = "DFECS_OUTPUT_DIR"


def default_output_dir() -> str:
    return os.environ.get(OUTPUT_ENV, ".")


@dataclass(frozen=True)
class RunConfig:
    """Everything a run depends on.

    ``grid`` is "default", "extended", "published:<DATASET>" (single-cell
    grid with a dataset's published selections) or "custom" (then
    ``custom_grid`` holds GridSpec fields).
    """

    beta: float = 0.05
    grid: str = "default"
    custom_grid: Optional[dict] = None
    seed: int = 0
    max_iterations: int = 500
    tol: float = 1e-6
    sample_count: Optional[int] = None
    anchors: str = "default"
    reference_subject: Optional[str] = None
    alpha: Optional[float] = None
    n_jobs: int = 1
    l1_max: float = 1000.0
    l1_step: float = 10.0
    per_k_refit: bool = True
    output_dir: str = field(default_factory=default_output_dir)

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        if not 0 < self.beta < 1:
            raise ConfigError(f"beta must lie in (0, 1), got {self.beta}")
        if self.grid.startswith("published:"):
            if self.grid.split(":", 1)[1] not in HFM_SELECTIONS:
                raise ConfigError(f"no published selections for {self.grid.split(':', 1)[1]!r}; "
                                  f"choose from {sorted(HFM_SELECTIONS)}")
        elif self.grid == "custom":
            if not isinstance(self.custom_grid, dict):
                raise ConfigError("grid 'custom' needs a custom_grid object")
        elif self.grid not in GRID_PRESETS:
            raise ConfigError(f"unknown grid preset {self.grid!r}")
        if self.sample_count is not None and self.sample_count < 1:
            raise ConfigError("sample_count must be >= 1")
        if self.anchors not in ANCHOR_SETS:
            raise ConfigError(f"anchors must be one of {sorted(ANCHOR_SETS)}")
        if self.alpha is not None and not self.alpha >= 0:
            raise ConfigError("alpha must be nonnegative")
        if self.n_jobs < 1:
            raise ConfigError("n_jobs must be >= 1")
        if not (self.l1_max > 0 and self.l1_step > 0):
            raise ConfigError("l1_max and l1_step must be positive")
        self.solver()  # validates max_iterations and tol
        self.grid_spec()

    def solver(self) -> SolverConfig:
        try:
            return SolverConfig(max_iterations=int(self.max_iterations), tol=float(self.tol),
                                seed=int(self.seed))
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from None

    def grid_spec(self) -> GridSpec:
        try:
            if self.grid.startswith("published:"):
                return published_grid(self.grid.split(":", 1)[1])
            if self.grid == "custom":
                return GridSpec.from_dict(self.custom_grid)
            return grid_preset(self.grid)
        except TypeError as exc:
            raise ConfigError(f"bad grid definition: {exc}") from None

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("output_dir")
        return d

    def with_overrides(self, **overrides) -> "RunConfig":
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        return cls(**d)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc.msg}, line {exc.lineno})") from None
        if not isinstance(d, dict):
            raise ConfigError(f"{path}: config must be a JSON object")
        return cls.from_dict(d)

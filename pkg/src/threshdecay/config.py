"""Run configuration: one serializable dataclass drives every subcommand."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field
from pathlib import Path


@dataclass
class RunConfig:
    dimension: int = 5
    lambda1: float = 0.25
    seed: int = 12345
    threads: int = 1

    # which potentials the spectral/evolution subcommands operate on
    decay_classes: tuple = ("generic", "first", "second")

    # node counts per ball
    nodes_kernel_checks: int = 128
    nodes_spectral: int = 750          # refined run doubles this
    nodes_laurent: dict = field(
        default_factory=lambda: {"generic": 256, "first": 192, "second": 96}
    )
    nodes_decay: dict = field(
        default_factory=lambda: {"generic": 256, "first": 192, "second": 64}
    )

    # grids
    t_min: float = 1e2
    t_max: float = 1e5
    t_count: int = 9
    t_min_free: float = 1e3
    lambda_fit_min: float = 1e-3
    lambda_fit_count: int = 24
    probe_pair_count: int = 12
    probe_radius_lo: float = 2.0
    probe_radius_hi: float = 6.0
    wide_radius_hi: float = 30.0

    # quadrature
    panel_order: int = 15
    phase_per_panel: float = 1.5707963267948966
    surrogate_order: int = 24
    lambda_min_stone: float = 1e-4

    # tolerances (acceptance gates)
    tol_kernel_closed_form: float = 1e-10
    tol_recurrence: float = 1e-10
    tol_expansion_slope: float = 0.05
    tol_ibp_slope: float = 0.05
    tol_jn: float = 1e-8
    tol_eigen_identity: float = 1e-10
    tol_decay_slope_psi: float = 0.1
    tol_laurent_lead: float = 0.01
    tol_difference_lead: float = 0.05
    tol_difference_degenerate: float = 1e-6
    tol_mdiff_slope: float = 0.15
    tol_free_slope: float = 0.1
    tol_class_slope: dict = field(
        default_factory=lambda: {"generic": 0.15, "first": 0.15, "second": 0.2}
    )
    rank_one_corr_min: float = 0.99

    def to_json(self) -> str:
        def _convert(v):
            if isinstance(v, tuple):
                return list(v)
            return v

        data = {k: _convert(v) for k, v in dataclasses.asdict(self).items()}
        return json.dumps(data, indent=2, sort_keys=True)

    @classmethod
    def from_file(cls, path: str | Path) -> "RunConfig":
        data = json.loads(Path(path).read_text())
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "decay_classes" in kwargs:
            kwargs["decay_classes"] = tuple(kwargs["decay_classes"])
        return cls(**kwargs)

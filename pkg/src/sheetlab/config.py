"""Experiment configuration: a versioned JSON document, its provenance hash
and the per-replicate seed rule."""
from __future__ import annotations

import copy
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from .homogeneous import validate_psi
from .linalg import InvalidInput
from .scale import SheetSpec, existence_check

SCHEMA = "sheetlab-config/1"
ARTIFACT_VERSION = "1"


@dataclass
class SynthesisParams:
    omega: float | None = None     # None: 16 pi n
    nfreq: int | None = None       # None: per-dimension default
    core_radius: float = 1e-3
    nterms: int = 4000

    def as_kwargs(self, alpha: float) -> dict:
        if alpha == 2.0:
            return {"omega": self.omega, "nfreq": self.nfreq, "core_radius": self.core_radius}
        return {"nterms": self.nterms}


@dataclass
class EstimatorParams:
    l_range: list | None = None
    vertical_unit: str = "oscillation"
    energy_pairs: int = 100_000


@dataclass
class VerifyParams:
    trials: int = 10
    pairs: int = 1000
    samples: int = 10_000


@dataclass
class ExperimentConfig:
    sheet: dict
    grid: dict
    synthesis: SynthesisParams = field(default_factory=SynthesisParams)
    estimator: EstimatorParams = field(default_factory=EstimatorParams)
    verify: VerifyParams = field(default_factory=VerifyParams)
    replicates: int = 1
    seed: int = 0
    tolerance: float | None = None
    name: str = ""

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = copy.deepcopy(data)
        schema = data.pop("schema", SCHEMA)
        if schema != SCHEMA:
            raise InvalidInput(f"config schema {schema!r} is not {SCHEMA!r}")
        try:
            return cls(
                sheet=data.pop("sheet"),
                grid=data.pop("grid"),
                synthesis=SynthesisParams(**data.pop("synthesis", {})),
                estimator=EstimatorParams(**data.pop("estimator", {})),
                verify=VerifyParams(**data.pop("verify", {})),
                **data,
            )
        except (KeyError, TypeError) as exc:
            raise InvalidInput(f"malformed config: {exc}") from exc

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise InvalidInput(f"{path}: not valid JSON ({exc})") from exc
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        return {
            "schema": SCHEMA, "name": self.name, "sheet": self.sheet, "grid": self.grid,
            "synthesis": vars(self.synthesis), "estimator": vars(self.estimator),
            "verify": vars(self.verify), "replicates": self.replicates,
            "seed": self.seed, "tolerance": self.tolerance,
        }

    @property
    def hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def sheet_spec(self) -> SheetSpec:
        spec = SheetSpec.from_dict(self.sheet, enforce_existence=False)
        rep = existence_check(spec)
        if not rep.ok:
            bad = ", ".join(f"block {j}: H={h:g}, a_1={h + mg:g}"
                            for j, (h, mg) in enumerate(zip(spec.H, rep.margins))
                            if h <= 0 or mg <= 0)
            raise InvalidInput(
                "refusing to run: the field exists (is stochastically continuous) if and "
                f"only if 0 < H_j < a_1^j for every block, which fails for {bad}")
        for j in range(spec.m):
            validate_psi(spec.psi[j], spec.fctx[j], trials=200, seed=j)
        return SheetSpec.from_dict(self.sheet)

    def default_tolerance(self, spec: SheetSpec) -> float:
        """Dimension tolerance used when the config does not set one."""
        if self.tolerance is not None:
            return float(self.tolerance)
        if spec.d == 1:
            return 0.1
        if all(dj == 1 for dj in spec.dims):
            return 0.15
        return 0.2


def replicate_seed(master: int, index: int) -> int:
    """hash(master seed, replicate index) folded to 63 bits."""
    h = hashlib.sha256(f"{int(master)}:{int(index)}".encode()).digest()
    return int.from_bytes(h[:8], "little") >> 1

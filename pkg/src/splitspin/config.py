"""Run configuration: defaults, (de)serialization, and hashing.

Defaults reproduce the reference regime: 1400 atoms squeezed by -7 dB,
a 50:50 split, and 20 blocks of 100 z / 100 y / 20 x measurements with the
paper noise budget.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

from .sampler import NoiseModel
from .splitter import EXACT_ATOM_LIMIT


@dataclass(frozen=True)
class RunConfig:
    n_atoms: int = 1400
    squeezing_db: float | None = -7.0
    chi_t: float | None = None
    transmission: float = 0.5
    theta_b: float = 0.0
    engine: str = "auto"
    exact_limit: int = EXACT_ATOM_LIMIT
    seed: int = 5
    n_blocks: int = 20
    block_z: int = 100
    block_y: int = 100
    block_x: int = 20
    noise: NoiseModel = field(default_factory=NoiseModel.paper)

    def __post_init__(self):
        if self.n_atoms < 1:
            raise ValueError("n_atoms must be >= 1")
        if self.engine not in ("auto", "exact", "gaussian"):
            raise ValueError(f"engine must be auto|exact|gaussian, got {self.engine!r}")
        if self.engine == "exact" and self.n_atoms > self.exact_limit:
            raise ValueError(
                f"engine 'exact' supports at most {self.exact_limit} atoms "
                f"(got n_atoms = {self.n_atoms}); use engine 'gaussian' or 'auto'"
            )
        if not 0.0 < self.transmission < 1.0:
            raise ValueError("transmission must be in (0, 1)")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")
        if min(self.n_blocks, self.block_z, self.block_y) < 1 or self.block_x < 0:
            raise ValueError("block schedule counts must be positive")
        if self.squeezing_db is not None and self.squeezing_db > 0:
            raise ValueError("squeezing_db must be <= 0 (dB below a CSS)")

    def shots_per_block(self) -> int:
        return self.block_z + self.block_y + self.block_x

    def to_dict(self) -> dict:
        data = dataclasses.asdict(self)
        data["noise"] = dataclasses.asdict(self.noise)
        return data

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        kwargs = dict(data)
        noise = kwargs.pop("noise", None)
        if noise is not None:
            kwargs["noise"] = NoiseModel(**noise)
        return cls(**kwargs)


def config_hash(config: RunConfig) -> str:
    """Stable hash of the full configuration; any change alters it."""
    blob = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def load_config(path) -> RunConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ValueError(f"config file {path} is not valid JSON: {exc}") from exc
    return RunConfig.from_dict(data)


def save_config(config: RunConfig, path) -> None:
    with open(path, "w") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")

"""Run configuration for the command-line pipeline."""
from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Mapping

from .generate import Limits
from .oracle.heuristic import PRESETS

REMOTE_PROTOCOLS = ("chat", "selection")
JUDGES = ("length", "remote")
MODES = ("topk", "first_k")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RunConfig:
    dataset: str = ""
    oracle: str = "heuristic"
    endpoint: str = ""
    # with a cassette, remote calls are replayed (or recorded) instead of sent live
    cassette: str = ""
    cassette_mode: str = "replay"
    remote_protocol: str = "chat"
    model: str = ""
    motifs: tuple[str, ...] = ()
    passes: int = 1
    k: int = 1
    mode: str = "first_k"
    seed: int = 0
    workers: int = 1
    judge: str = "length"
    judge_endpoint: str = ""
    judge_cassette: str = ""
    limits: Limits = field(default_factory=Limits)
    n_samples: int = 10_000
    membership_pattern: str = ""
    out: str = "out"

    def __post_init__(self):
        if self.passes < 1:
            raise ConfigError("passes (K) must be at least 1")
        if not 1 <= self.k <= self.passes:
            raise ConfigError(f"k={self.k} must lie in 1..{self.passes}")
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}")
        known = set(PRESETS) | {"motif", "motif-merge", "remote"}
        if self.oracle not in known:
            raise ConfigError(f"unknown oracle {self.oracle!r}; choose from {sorted(known)}")
        if self.oracle in ("motif", "motif-merge") and not self.motifs:
            raise ConfigError(f"oracle {self.oracle!r} needs at least one motif pattern")
        if self.oracle == "remote" and not (self.endpoint or self.cassette):
            raise ConfigError("remote oracle requires an endpoint (or a cassette to replay)")
        if self.cassette_mode not in ("replay", "record"):
            raise ConfigError("cassette_mode must be 'replay' or 'record'")
        if self.cassette_mode == "record" and not self.endpoint:
            raise ConfigError("recording a cassette requires an endpoint")
        if self.remote_protocol not in REMOTE_PROTOCOLS:
            raise ConfigError(f"remote_protocol must be one of {REMOTE_PROTOCOLS}")
        if self.judge not in JUDGES:
            raise ConfigError(f"judge must be one of {JUDGES}")
        if self.judge == "remote" and not (self.judge_endpoint or self.judge_cassette):
            raise ConfigError("remote judge requires judge_endpoint (or judge_cassette)")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.n_samples < 1:
            raise ConfigError("n_samples must be at least 1")

    @property
    def out_dir(self) -> Path:
        return Path(self.out)

    def grammar_path(self) -> Path:
        return self.out_dir / f"grammar_{self.mode}_k{self.k}.json"

    def derived_seed(self, *parts: Any) -> int:
        """Independent stream per (molecule, pass, ...) drawn from the root seed."""
        text = ":".join(str(p) for p in (self.seed, *parts))
        return int.from_bytes(hashlib.blake2b(text.encode(), digest_size=4).digest(), "big")

    def to_json(self) -> dict:
        data = asdict(self)
        data["motifs"] = list(self.motifs)
        return data

    @classmethod
    def from_json(cls, data: Mapping) -> "RunConfig":
        names = {f.name for f in fields(cls)}
        unknown = set(data) - names
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kwargs = dict(data)
        if "limits" in kwargs:
            kwargs["limits"] = Limits(**kwargs["limits"])
        if "motifs" in kwargs:
            kwargs["motifs"] = tuple(kwargs["motifs"])
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    @classmethod
    def load(cls, path: str | Path) -> "RunConfig":
        """JSON file; a relative dataset path is taken relative to the file."""
        path = Path(path)
        data = json.loads(path.read_text(encoding="utf-8"))
        for key in ("dataset", "cassette", "judge_cassette"):
            if data.get(key) and not Path(data[key]).is_absolute():
                data[key] = str(path.parent / data[key])
        return cls.from_json(data)

    def override(self, **changes: Any) -> "RunConfig":
        return replace(self, **{k: v for k, v in changes.items() if v is not None})

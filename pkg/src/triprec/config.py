"""Run configuration: JSON file + flag overrides, validation that reports
every violation at once, and a content fingerprint that keys pipeline
artifacts so stale stage outputs are never silently mixed."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field, fields

from .errors import ConfigError
from .selftrain import TrainConfig

# fields that identify WHAT is computed; everything else is runtime plumbing
_SEMANTIC_EXCLUDE = {"out_dir", "jobs", "host", "port", "cors_origins",
                     "folds", "trainer"}


@dataclass
class Config:
    # data inputs
    pois: str | None = None
    trips: str | None = None
    flickr_format: bool = False
    tz_offset_hours: float = 0.0
    # run plumbing
    out_dir: str = "out"
    seed: int = 0
    jobs: int = 1
    folds: int = 0          # evaluate: 0 = exact leave-one-out, >=2 = grouped folds
    trainer: str = "model"  # evaluate: model | markov | oracle
    host: str = "127.0.0.1"
    port: int = 8000
    cors_origins: list[str] = field(default_factory=list)
    # model / training hyperparameters
    d: int = 250
    d_q: int = 256
    hidden: int = 256
    f_out: int = 64
    batch_size: int = 8
    lr: float = 0.1
    k: int = 11
    alpha: int = 6
    m_per_query: int = 5
    max_attempts_per_walk: int = 20
    threshold_km: float = 3.0
    epochs_poi: int = 50
    epochs_warmup: int = 30
    epochs_supervised: int = 300
    mask_ratio: float = 0.2
    cutoff_ratio: float = 0.2
    dropout_rate: float = 0.5
    allow_identical_views: bool = False
    finetune_v: bool = False
    # ablation toggles
    no_warmup: bool = False       # drops BOTH contrastive phases (random POI table)
    no_dest_signal: bool = False  # drops the destination head from the loss
    concat_query: bool = False    # query encoder without the bilinear term

    def validate(self) -> None:
        problems = []
        try:
            self.to_train_config().validate()
        except ConfigError as exc:
            problems.append(str(exc))
        if self.jobs < 1:
            problems.append("jobs must be >= 1")
        if self.folds == 1 or self.folds < 0:
            problems.append("folds must be 0 (exact leave-one-out) or >= 2")
        if self.trainer not in ("model", "markov", "oracle"):
            problems.append(f"trainer must be model/markov/oracle, got {self.trainer!r}")
        if not 0 < self.port < 65536:
            problems.append(f"port must be in 1..65535, got {self.port}")
        if problems:
            raise ConfigError("; ".join(problems))

    def to_train_config(self) -> TrainConfig:
        return TrainConfig(
            d=self.d, d_q=self.d_q, hidden=self.hidden, f_out=self.f_out,
            batch_size=self.batch_size, lr=self.lr, k=self.k, alpha=self.alpha,
            m_per_query=self.m_per_query,
            max_attempts_per_walk=self.max_attempts_per_walk,
            threshold_km=self.threshold_km,
            epochs_poi=0 if self.no_warmup else self.epochs_poi,
            epochs_warmup=0 if self.no_warmup else self.epochs_warmup,
            epochs_supervised=self.epochs_supervised,
            mask_ratio=self.mask_ratio, cutoff_ratio=self.cutoff_ratio,
            dropout_rate=self.dropout_rate,
            allow_identical_views=self.allow_identical_views,
            use_bilinear=not self.concat_query,
            use_dest_signal=not self.no_dest_signal,
            finetune_v=self.finetune_v,
            seed=self.seed,
        )

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def fingerprint(self) -> str:
        """sha256 over the semantic fields (data + hyperparameters + seed)."""
        semantic = {f.name: getattr(self, f.name) for f in fields(self)
                    if f.name not in _SEMANTIC_EXCLUDE}
        blob = json.dumps(semantic, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()


def load_config(path=None, overrides: dict | None = None) -> Config:
    """Defaults, then JSON file values, then explicit overrides (flags win).

    Unknown keys in either layer are rejected, every violation reported.
    """
    known = {f.name for f in fields(Config)}
    values: dict = {}
    if path is not None:
        try:
            with open(path) as fh:
                doc = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}")
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
        unknown = sorted(set(doc) - known)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        values.update(doc)
    for key, val in (overrides or {}).items():
        if key not in known:
            raise ConfigError(f"unknown config override: {key}")
        if val is not None:
            values[key] = val
    try:
        cfg = Config(**values)
    except TypeError as exc:
        raise ConfigError(f"bad config value: {exc}")
    cfg.validate()
    return cfg

"""Pipeline configuration: one YAML file, dataclasses all the way down.

Every run serializes its full effective config into the run metadata, so a
run directory is self-describing and reproducible.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import yaml

from .synthesize import SyntheticSpec


@dataclass
class DataConfig:
    manifest: str | None = None       # corpus manifest JSONL
    rod: str | None = None            # risk-object database CSV
    synthetic: SyntheticSpec | None = None
    direct_labels: str | None = None  # JSON {pmid: [positive sent_ids]}
    er_annotations: str | None = None  # gold ER JSONL for non-synthetic corpora

    def validate(self):
        if self.synthetic is None and self.manifest is None:
            raise ValueError("data config needs either a manifest or a synthetic spec")
        if self.synthetic is None and self.rod is None:
            raise ValueError("data config needs a ROD CSV when not synthetic")


@dataclass
class ReprConfig:
    mode: str = "tfidf"              # bow | tfidf | cls
    embedding_dim: int = 300
    embeddings: str | None = None    # word-vector text file; None -> hashed table
    hash_seed: int = 13

    def validate(self):
        if self.mode not in ("bow", "tfidf", "cls"):
            raise ValueError(f"unknown repr mode {self.mode!r}")


@dataclass
class LabelingConfig:
    k_top: int = 3


@dataclass
class SplitConfig:
    ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seed: int = 42

    def validate(self):
        if abs(sum(self.ratios) - 1.0) > 1e-9:
            raise ValueError("split ratios must sum to 1")


@dataclass
class EncoderSpec:
    kind: str = "tiny"               # tiny | hf
    model: str | None = None         # HF identifier or local dir (kind=hf)
    dim: int = 32
    layers: int = 2
    heads: int = 2
    max_len: int = 128
    seed: int = 3
    min_word_freq: int = 1

    def validate(self):
        if self.kind not in ("tiny", "hf"):
            raise ValueError(f"unknown encoder kind {self.kind!r}")
        if self.kind == "hf" and not self.model:
            raise ValueError("hf encoder needs a model identifier")


@dataclass
class AscertainmentConfig:
    kind: str = "logistic"           # logistic | svm_hinge | encoder
    lr: float = 2e-5
    batch_size: int = 32
    epochs: int = 4
    seed: int = 1
    C: float = 1.0
    class_weight: str | None = None
    threshold: float = 0.5


@dataclass
class ExtractionConfig:
    mode: str = "joint"              # joint | disjoint
    window_length: int = 12
    window_stride: int = 6
    relation_threshold: float = 0.5
    lr: float = 5e-5
    batch_size: int = 16
    epochs: int = 10
    seed: int = 2
    schedule: str = "linear"


@dataclass
class ServiceConfig:
    host: str = "127.0.0.1"
    port: int = 8001
    frontend_dir: str | None = None


@dataclass
class PipelineConfig:
    run_id: str | None = None
    workdir: str = "runs"
    model_registry: str | None = None  # default: {workdir}/models
    data: DataConfig = field(default_factory=DataConfig)
    repr: ReprConfig = field(default_factory=ReprConfig)
    labeling: LabelingConfig = field(default_factory=LabelingConfig)
    split: SplitConfig = field(default_factory=SplitConfig)
    encoder: EncoderSpec = field(default_factory=EncoderSpec)
    ascertainment: AscertainmentConfig = field(default_factory=AscertainmentConfig)
    extraction: ExtractionConfig = field(default_factory=ExtractionConfig)
    service: ServiceConfig = field(default_factory=ServiceConfig)

    def validate(self):
        self.data.validate()
        self.repr.validate()
        self.split.validate()
        self.encoder.validate()
        if self.extraction.mode not in ("joint", "disjoint"):
            raise ValueError(f"unknown extraction mode {self.extraction.mode!r}")
        if self.ascertainment.kind not in ("logistic", "svm_hinge", "encoder"):
            raise ValueError(f"unknown classifier kind {self.ascertainment.kind!r}")

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True).encode("utf-8")
        return hashlib.sha256(blob).hexdigest()[:12]

    def resolved_run_id(self) -> str:
        return self.run_id or f"run-{self.config_hash()}"

    def run_dir(self) -> Path:
        return Path(self.workdir) / self.resolved_run_id()

    def registry_dir(self) -> Path:
        if self.model_registry:
            return Path(self.model_registry)
        return Path(self.workdir) / "models"

    @classmethod
    def from_dict(cls, raw: dict) -> "PipelineConfig":
        raw = dict(raw or {})

        def sub(key, klass, **convert):
            payload = dict(raw.pop(key, {}) or {})
            for name, fn in convert.items():
                if payload.get(name) is not None:
                    payload[name] = fn(payload[name])
            return klass(**payload)

        data = sub("data", DataConfig,
                   synthetic=lambda d: SyntheticSpec(**{
                       **d,
                       "genes_per_doc": tuple(d.get("genes_per_doc", (2, 3))),
                       "estimate_range": tuple(d.get("estimate_range", (0.4, 25.0))),
                   }) if not isinstance(d, SyntheticSpec) else d)
        config = cls(
            data=data,
            repr=sub("repr", ReprConfig),
            labeling=sub("labeling", LabelingConfig),
            split=sub("split", SplitConfig, ratios=tuple),
            encoder=sub("encoder", EncoderSpec),
            ascertainment=sub("ascertainment", AscertainmentConfig),
            extraction=sub("extraction", ExtractionConfig),
            service=sub("service", ServiceConfig),
            **raw,
        )
        config.validate()
        return config

    @classmethod
    def from_yaml(cls, path) -> "PipelineConfig":
        raw = yaml.safe_load(Path(path).read_text(encoding="utf-8"))
        return cls.from_dict(raw or {})

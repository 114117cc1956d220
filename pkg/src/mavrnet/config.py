"""Run configuration: one JSON-serializable bundle covering training, model
ablations, corpus rendering, and view-extraction settings.

Unknown sections or keys are rejected by name; every command writes its fully
resolved snapshot beside its outputs so a run directory is self-describing.
"""

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field

from .model import ModelConfig
from .synthetic import BACKGROUNDS
from .views import FlowConfig, MaskConfig


@dataclass
class TrainSettings:
    epochs: int = 25
    lr: float = 0.01
    batch_size: int = 8  # desk default; 64 at paper scale
    momentum: float = 0.9
    weight_decay: float = 1e-4
    crop: int = 64  # desk default; 224 at paper scale
    flip_prob: float = 0.5
    seed: int = 0
    lambda1: float = 0.5
    lambda2: float = 0.1
    tau: float = 0.07
    deterministic: bool = False
    checkpoint_policy: str = "best"

    def __post_init__(self):
        if self.lr <= 0:
            raise ValueError("lr must be positive")
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ValueError("flip_prob must be in [0, 1]")
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be at least 1")
        if self.checkpoint_policy not in ("best", "final"):
            raise ValueError("checkpoint_policy must be 'best' or 'final'")


@dataclass
class ModelSettings:
    views: tuple = ("rgb", "flow", "mask")
    width: int = 16
    pyramid_dim: int = 64
    heads: int = 12
    norm_groups: int = 8
    use_mvfpn: bool = True
    use_attention: bool = True
    use_alignment: bool = True

    def __post_init__(self):
        self.views = tuple(self.views)

    def to_model_config(self) -> ModelConfig:
        return ModelConfig(
            views=self.views,
            width=self.width,
            pyramid_dim=self.pyramid_dim,
            heads=self.heads,
            norm_groups=self.norm_groups,
            use_mvfpn=self.use_mvfpn,
            use_attention=self.use_attention,
        )


@dataclass
class RenderSettings:
    frame_size: tuple = (64, 64)
    background: str = "flat"
    illumination_jitter: float = 0.0
    pixel_noise_sigma: float = 0.0
    n_per_class_per_scale: int = 50

    def __post_init__(self):
        self.frame_size = tuple(self.frame_size)
        if self.background not in BACKGROUNDS:
            raise ValueError(f"background must be one of {BACKGROUNDS}")


@dataclass
class FlowSettings:
    levels: int = 0  # 0 = deepest pyramid that still fits the frame
    pyr_scale: float = 0.5
    winsize: int = 15
    iterations: int = 3
    poly_n: int = 5
    poly_sigma: float = 1.1

    def resolve(self, frame_size) -> FlowConfig:
        from .synthetic import default_flow_config

        kwargs = dataclasses.asdict(self)
        if kwargs.pop("levels") > 0:
            return FlowConfig(levels=self.levels, **kwargs)
        return default_flow_config(frame_size, FlowConfig(levels=3, **kwargs))


@dataclass
class RunConfig:
    train: TrainSettings = field(default_factory=TrainSettings)
    model: ModelSettings = field(default_factory=ModelSettings)
    render: RenderSettings = field(default_factory=RenderSettings)
    flow: FlowSettings = field(default_factory=FlowSettings)
    mask: MaskConfig = field(default_factory=MaskConfig)

    _SECTIONS = {
        "train": TrainSettings,
        "model": ModelSettings,
        "render": RenderSettings,
        "flow": FlowSettings,
        "mask": MaskConfig,
    }

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        unknown = set(data) - set(cls._SECTIONS)
        if unknown:
            raise ValueError(f"unknown config sections: {sorted(unknown)}")
        sections = {}
        for name, section_cls in cls._SECTIONS.items():
            payload = dict(data.get(name, {}))
            known = {f.name for f in dataclasses.fields(section_cls)}
            bad = set(payload) - known
            if bad:
                raise ValueError(f"unknown keys in [{name}]: {sorted(bad)}")
            sections[name] = section_cls(**payload)
        return cls(**sections)

    @classmethod
    def from_file(cls, path) -> "RunConfig":
        with open(path) as fp:
            return cls.from_dict(json.load(fp))

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["model"]["views"] = list(out["model"]["views"])
        out["render"]["frame_size"] = list(out["render"]["frame_size"])
        return out

    def write(self, path) -> None:
        with open(path, "w") as fp:
            json.dump(self.to_dict(), fp, indent=1, sort_keys=True)
            fp.write("\n")

    def group_hash(self) -> str:
        """Identity of a run arm for seed aggregation: the resolved config
        with the seed (and determinism toggle) masked out."""
        masked = self.to_dict()
        masked["train"].pop("seed")
        masked["train"].pop("deterministic")
        blob = json.dumps(masked, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

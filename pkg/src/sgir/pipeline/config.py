"""
Training and field configuration.

Both dataclasses load from plain dicts (the JSON run config) and reject
unknown keys.
"""

from dataclasses import asdict, dataclass, field, fields
from typing import Dict, Tuple

from sgir.errors import ValidationError
from sgir.shading.visibility import ETA_SAMPLES
from sgir.tonemap import TONE_CURVES

DEFAULT_LR_SCALES = {
    "normals": 100.0,
    "visibility": 200.0,
    "indirect": 100.0,
    "qtilde": 100.0,
    "material": 200.0,
    "material.decoder_weight": 20.0,
    "material.decoder_bias": 20.0,
    "env": 40.0,
    "gamma_logit": 20.0,
}


def from_dict(cls, data, what):
    if data is None:
        return cls()
    if not isinstance(data, dict):
        raise ValidationError(f"{what} must be a JSON object")
    known = {f.name for f in fields(cls)}
    for key in data:
        if key not in known:
            raise ValidationError(f"unknown {what} key {key!r}")
    return cls(**data)


@dataclass
class StageConfig:
    batch_size: int = 1024
    epochs: int = 20
    seed: int = 0
    lr: float = 5e-4
    lr_scales: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_LR_SCALES))
    weight_rgb: float = 1.0
    weight_sm: float = 0.01
    weight_kl: float = 0.001
    weight_rve: float = 0.01
    epsilon: float = 0.01
    rho: float = 0.05
    rve_warmup_epochs: int = 5
    normal_noise: float = 0.02
    latent_noise: float = 0.01
    surface_samples: int = 4096
    directions_per_point: int = 4
    eta_samples: int = ETA_SAMPLES
    indirect_spp: int = 16
    gamma_range: Tuple[float, float] = (0.01, 1.0)
    gamma_init: float = 0.5
    chunk_size: int = 256
    threads: int = 1
    rve: bool = True
    masked_indirect: bool = True
    finetune_visibility: bool = True
    finetune_normals: bool = True
    normals_finetune_scale: float = 0.1
    tone_curve: str = "aces"
    progress: bool = False

    @classmethod
    def from_dict(cls, data):
        config = from_dict(cls, data, "stage config")
        config.gamma_range = tuple(config.gamma_range)
        merged = dict(DEFAULT_LR_SCALES)
        merged.update(config.lr_scales)
        config.lr_scales = merged
        return config.validate()

    def validate(self):
        weights = {"weight_rgb": self.weight_rgb, "weight_sm": self.weight_sm, "weight_kl": self.weight_kl,
                   "weight_rve": self.weight_rve}
        for name, value in weights.items():
            if value < 0:
                raise ValidationError(f"{name} must be >= 0, got {value}")
        for name in ("batch_size", "chunk_size", "threads", "eta_samples", "indirect_spp",
                     "directions_per_point", "surface_samples"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1")
        if self.epochs < 0 or self.rve_warmup_epochs < 0:
            raise ValidationError("epoch counts must be >= 0")
        if self.normals_finetune_scale < 0:
            raise ValidationError("normals_finetune_scale must be >= 0")
        for name, scale in self.lr_scales.items():
            if scale < 0:
                raise ValidationError(f"lr_scales[{name!r}] must be >= 0, got {scale}")
        if self.lr <= 0:
            raise ValidationError("lr must be positive")
        if not 0.0 < self.epsilon < 1.0 or not 0.0 < self.rho < 1.0:
            raise ValidationError("epsilon and rho must lie in (0, 1)")
        lo, hi = self.gamma_range
        if not 0.0 < lo <= hi <= 1.0:
            raise ValidationError(f"gamma_range must satisfy 0 < lo <= hi <= 1, got {self.gamma_range}")
        if not 0.0 < self.gamma_init <= 1.0:
            raise ValidationError("gamma_init must lie in (0, 1]")
        if self.tone_curve not in TONE_CURVES:
            raise ValidationError(f"unknown tone curve {self.tone_curve!r}")
        return self

    def to_dict(self):
        return asdict(self)


@dataclass
class FieldConfig:
    normal_resolution: int = 64
    visibility_resolution: int = 32
    codebook_size: int = 64
    indirect_resolution: int = 16
    indirect_lobes: int = 24
    qtilde_resolution: int = 32
    material_resolution: int = 64
    latent_channels: int = 8
    env_lobes: int = 128

    @classmethod
    def from_dict(cls, data):
        return from_dict(cls, data, "field config").validate()

    def validate(self):
        for name in ("normal_resolution", "visibility_resolution", "indirect_resolution",
                     "qtilde_resolution", "material_resolution"):
            if getattr(self, name) < 2:
                raise ValidationError(f"{name} must be >= 2")
        if self.codebook_size < 4:
            raise ValidationError("codebook_size must be >= 4")
        for name in ("indirect_lobes", "latent_channels", "env_lobes"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1")
        return self

    def to_dict(self):
        return asdict(self)

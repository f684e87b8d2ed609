"""
Run configuration: what the command line reads from ``--config``.

A run config is a JSON object::

    {
      "scene": "standard",            # or a path to a scene JSON
      "dataset": "out/dataset",
      "out": "out",
      "seed": 0,
      "threads": 4,
      "views": 24, "spp": 256, "gamma_gt": 0.2, "width": 64, "height": 64, "bounce": 1,
      "octree_depth": 8,
      "stage": {...},                 # StageConfig shared by every stage
      "stages": {"normals": {...}},   # per-stage StageConfig overrides
      "fields": {...}                 # FieldConfig
    }
"""

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, Optional

from sgir.errors import ValidationError
from sgir.geometry.sdf import SdfScene, standard_scene
from sgir.pipeline.config import FieldConfig, StageConfig

STAGE_NAMES = ("normals", "visibility", "indirect", "decompose")


@dataclass
class RunConfig:
    scene: str = "standard"
    dataset: Optional[str] = None
    out: str = "out"
    seed: int = 0
    threads: int = 1
    views: int = 24
    spp: int = 256
    gamma_gt: float = 0.2
    width: int = 64
    height: int = 64
    bounce: int = 1
    octree_depth: int = 8
    stage: StageConfig = field(default_factory=StageConfig)
    stages: Dict[str, Dict[str, Any]] = field(default_factory=dict)
    fields: FieldConfig = field(default_factory=FieldConfig)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ValidationError("run config must be a JSON object")
        known = {f.name for f in fields(cls)}
        for key in data:
            if key not in known:
                raise ValidationError(f"unknown run config key {key!r}")
        values = dict(data)
        values["stage"] = StageConfig.from_dict(values.get("stage"))
        values["fields"] = FieldConfig.from_dict(values.get("fields"))
        return cls(**values).validate()

    def validate(self):
        if self.threads < 1:
            raise ValidationError("threads must be >= 1")
        if not 0.0 < self.gamma_gt <= 1.0:
            raise ValidationError(f"gamma_gt must lie in (0, 1], got {self.gamma_gt}")
        for name in ("views", "spp", "width", "height", "bounce", "octree_depth"):
            if getattr(self, name) < 1:
                raise ValidationError(f"{name} must be >= 1")
        if not isinstance(self.stages, dict):
            raise ValidationError("stages must map stage names to objects")
        for name, overrides in self.stages.items():
            if name not in STAGE_NAMES:
                raise ValidationError(f"unknown stage {name!r}; expected one of {', '.join(STAGE_NAMES)}")
            self.stage_config(name, overrides)
        return self

    def stage_config(self, name, overrides=None):
        """The shared StageConfig with this stage's overrides, seed and threads applied."""
        overrides = self.stages.get(name, {}) if overrides is None else overrides
        if not isinstance(overrides, dict):
            raise ValidationError(f"stage {name!r} overrides must be a JSON object")
        merged = self.stage.to_dict()
        merged.update(overrides)
        merged["seed"] = self.seed
        merged["threads"] = self.threads
        return StageConfig.from_dict(merged)

    def load_scene(self):
        return load_scene(self.scene)

    def to_dict(self):
        return asdict(self)


def load_scene(name):
    """The built-in standard scene for "standard", else a scene JSON file."""
    if name == "standard":
        return standard_scene()
    return SdfScene.from_config(read_json(name))


def read_json(path):
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"no such file: {path}")
    try:
        return json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: invalid JSON ({exc})") from exc


def load_run_config(path=None):
    """RunConfig from a JSON file; the defaults when ``path`` is None."""
    if path is None:
        return RunConfig()
    return RunConfig.from_dict(read_json(path))

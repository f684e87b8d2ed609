"""
Every trainable quantity of a scene in one ParamStore.
"""

import logging

import torch

from sgir.fields.directional import DirectionalField
from sgir.fields.models import IndirectSGField, MaterialLatentField, NormalField, QTildeField
from sgir.fields.params import AdamState, ParamStore
from sgir.io.checkpoint import load_checkpoint, save_checkpoint
from sgir.pipeline.config import DEFAULT_LR_SCALES, FieldConfig
from sgir.shading.light import EnvLightParams
from sgir.tonemap import ToneParams, gamma_logit
from sgir.util.sampling import DTYPE, torch_generator

logger = logging.getLogger(__name__)

GAMMA_SLICE = "gamma_logit"


def _cube(n):
    return (n, n, n)


class SceneModel:
    """Normals, visibility, indirect light, Q-tilde, materials, environment and gamma.

    Slice names are fixed: "normals", "visibility", "indirect", "qtilde",
    "material" (plus its decoder slices), "env" and "gamma_logit".
    """

    def __init__(self, bbox, fields=None, seed=0, gamma=0.5, lr_scales=None):
        self.fields = fields or FieldConfig()
        self.bbox = torch.as_tensor(bbox, dtype=DTYPE).reshape(2, 3)
        cfg = self.fields
        store = ParamStore()
        self.store = store
        self.normals = NormalField(store, "normals", _cube(cfg.normal_resolution), self.bbox)
        self.visibility = DirectionalField(store, "visibility", _cube(cfg.visibility_resolution), self.bbox,
                                           cfg.codebook_size)
        self.indirect = IndirectSGField(store, "indirect", _cube(cfg.indirect_resolution), self.bbox,
                                        cfg.indirect_lobes)
        self.qtilde = QTildeField(store, "qtilde", _cube(cfg.qtilde_resolution), self.bbox, cfg.env_lobes)
        self.material = MaterialLatentField(store, "material", _cube(cfg.material_resolution), self.bbox,
                                            cfg.latent_channels, seed_generator=torch_generator(seed, 0x4D))
        self.env = EnvLightParams(store, "env", cfg.env_lobes)
        store.register(GAMMA_SLICE, torch.tensor([gamma_logit(gamma)], dtype=DTYPE))
        self.apply_lr_scales(lr_scales or DEFAULT_LR_SCALES)
        logger.info("scene model with %d parameters", len(store))

    def apply_lr_scales(self, scales):
        for name, scale in scales.items():
            if name in self.store:
                self.store.set_lr_scale(name, scale)

    def train_only(self, *names):
        """Make exactly the named slices trainable."""
        for name in self.store.slices:
            self.store.set_trainable(name, name in names)

    @property
    def material_slices(self):
        return (self.material.name, self.material.weight_name, self.material.bias_name)

    def tone(self, curve="aces"):
        return ToneParams.from_logit(self.store.view(GAMMA_SLICE)[0], curve)

    def gamma(self):
        return float(torch.sigmoid(self.store.value(GAMMA_SLICE)[0]))

    def env_mixture(self):
        return self.env.mixture()

    def optimizer(self, lr):
        return AdamState.for_store(self.store, lr)

    def save(self, path):
        save_checkpoint(path, self.store)

    def load(self, path, strict=True):
        load_checkpoint(path, self.store, strict)
        return self

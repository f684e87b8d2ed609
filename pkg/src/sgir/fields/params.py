"""
One flat parameter vector with named slices, and the Adam optimizer over it.
"""

import logging
from collections import OrderedDict
from dataclasses import dataclass

import torch

from sgir.errors import NonFiniteGradient, ValidationError
from sgir.util.sampling import DTYPE

logger = logging.getLogger(__name__)

DEFAULT_LR = 5e-4


@dataclass
class ParamSlice:
    name: str
    start: int
    stop: int
    shape: tuple
    lr_scale: float = 1.0
    trainable: bool = True

    @property
    def size(self):
        return self.stop - self.start


class ParamStore:
    """Named, disjoint slices over a single requires-grad float64 vector.

    Slices are laid out in registration order. Fields read their values
    through :meth:`view`, so gradients of any loss can be taken against
    :attr:`flat` in one call.
    """

    def __init__(self):
        self.slices = OrderedDict()
        self.flat = torch.zeros(0, dtype=DTYPE, requires_grad=True)

    def register(self, name, init, lr_scale=1.0, trainable=True):
        if name in self.slices:
            raise ValidationError(f"parameter {name!r} registered twice")
        init = torch.as_tensor(init, dtype=DTYPE).detach()
        start = self.flat.numel()
        self.slices[name] = ParamSlice(name, start, start + init.numel(), tuple(init.shape), lr_scale, trainable)
        self.flat = torch.cat([self.flat.detach(), init.reshape(-1)]).requires_grad_(True)
        return self.slices[name]

    def __contains__(self, name):
        return name in self.slices

    def __len__(self):
        return self.flat.numel()

    def view(self, name):
        s = self.slices[name]
        return self.flat[s.start:s.stop].view(s.shape)

    def value(self, name):
        return self.view(name).detach().clone()

    def set_value(self, name, value):
        s = self.slices[name]
        with torch.no_grad():
            self.flat[s.start:s.stop] = torch.as_tensor(value, dtype=DTYPE).reshape(-1)

    def set_trainable(self, name, trainable=True):
        self.slices[name].trainable = trainable

    def set_lr_scale(self, name, scale):
        self.slices[name].lr_scale = float(scale)

    def trainable_mask(self):
        mask = torch.zeros(len(self), dtype=DTYPE)
        for s in self.slices.values():
            if s.trainable:
                mask[s.start:s.stop] = 1.0
        return mask

    def lr_scales(self):
        scales = torch.ones(len(self), dtype=DTYPE)
        for s in self.slices.values():
            scales[s.start:s.stop] = s.lr_scale
        return scales

    def zero_grad(self):
        self.flat.grad = None

    def state_dict(self):
        return OrderedDict((name, self.value(name)) for name in self.slices)

    def load_state_dict(self, state, strict=True):
        for name, value in state.items():
            if name not in self.slices:
                if strict:
                    raise ValidationError(f"unknown parameter {name!r} in checkpoint")
                continue
            if tuple(value.shape) != self.slices[name].shape:
                raise ValidationError(
                    f"parameter {name!r} has shape {tuple(value.shape)}, expected {self.slices[name].shape}")
            self.set_value(name, value)


@dataclass
class AdamState:
    m: torch.Tensor
    v: torch.Tensor
    step: int = 0
    lr: float = DEFAULT_LR
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def for_store(cls, store, lr=DEFAULT_LR):
        return cls(torch.zeros(len(store), dtype=DTYPE), torch.zeros(len(store), dtype=DTYPE), lr=lr)

    def resize(self, size):
        """Zero moments for parameters registered after the state was made."""
        grow = size - self.m.numel()
        if grow > 0:
            self.m = torch.cat([self.m, torch.zeros(grow, dtype=DTYPE)])
            self.v = torch.cat([self.v, torch.zeros(grow, dtype=DTYPE)])


def adam_step(params, grads, state):
    """One bias-corrected Adam update of the trainable slices, in place.

    Raises:
        NonFiniteGradient: any gradient component is NaN or infinite; nothing is updated
    """
    grads = torch.as_tensor(grads, dtype=DTYPE).reshape(-1)
    if grads.numel() != len(params):
        raise ValidationError(f"gradient has {grads.numel()} entries, parameters have {len(params)}")
    bad = ~torch.isfinite(grads)
    if bool(bad.any()):
        logger.error("aborting optimizer step: %d non-finite gradient components", int(bad.sum()))
        raise NonFiniteGradient(f"{int(bad.sum())} non-finite gradient components")
    state.resize(len(params))
    mask = params.trainable_mask()
    g = grads * mask
    state.step += 1
    state.m.mul_(state.beta1).add_((1.0 - state.beta1) * g)
    state.v.mul_(state.beta2).add_((1.0 - state.beta2) * g * g)
    m_hat = state.m / (1.0 - state.beta1 ** state.step)
    v_hat = state.v / (1.0 - state.beta2 ** state.step)
    update = state.lr * params.lr_scales() * mask * m_hat / (torch.sqrt(v_hat) + state.eps)
    with torch.no_grad():
        params.flat.sub_(update)
    return params, state

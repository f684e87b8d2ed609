"""
Gradient plumbing: map-reduce accumulation over loss chunks and a
finite-difference checker.
"""

from dataclasses import dataclass, field

import numpy as np
import torch

from sgir.util.parallel import parallel_map
from sgir.util.sampling import DTYPE, rng_for

GRADCHECK_TOLERANCE = 1e-3


def _chunk_gradient(closure, store):
    loss = closure()
    if not loss.requires_grad:
        return loss.detach(), torch.zeros(len(store), dtype=DTYPE)
    (grad,) = torch.autograd.grad(loss, store.flat, allow_unused=True)
    if grad is None:
        grad = torch.zeros(len(store), dtype=DTYPE)
    return loss.detach(), grad


def accumulate_gradients(closures, store, threads=1):
    """Sum of losses and of their gradients over ``closures``, reduced in order.

    Each closure builds one scalar loss from the store's current values. The
    result does not depend on ``threads``.
    """
    parts = parallel_map(lambda c: _chunk_gradient(c, store), list(closures), threads)
    total_loss = torch.zeros((), dtype=DTYPE)
    total_grad = torch.zeros(len(store), dtype=DTYPE)
    for loss, grad in parts:
        total_loss = total_loss + loss
        total_grad = total_grad + grad
    return total_loss, total_grad


@dataclass
class GradcheckReport:
    coords: list
    analytic: list
    numeric: list
    relative_errors: list = field(default_factory=list)
    tolerance: float = GRADCHECK_TOLERANCE

    @property
    def max_relative_error(self):
        return max(self.relative_errors, default=0.0)

    @property
    def passed(self):
        return self.max_relative_error <= self.tolerance

    def format(self):
        lines = [f"gradcheck: {len(self.coords)} coords, max relative error {self.max_relative_error:.3e} "
                 f"({'pass' if self.passed else 'FAIL'})"]
        for i, a, n, r in zip(self.coords, self.analytic, self.numeric, self.relative_errors):
            lines.append(f"  [{i}] analytic={a:+.6e} numeric={n:+.6e} rel={r:.2e}")
        return "\n".join(lines)


def relative_error(a, n, floor=1e-6):
    return abs(a - n) / max(abs(a), abs(n), floor)


def gradcheck(loss_closure, store, count=32, h=1e-6, seed=0, candidates=None):
    """Compare autograd against central differences on randomly chosen coordinates.

    Coordinates with a nonzero analytic gradient are preferred so the checked coordinates
    exercise the loss; ``candidates`` restricts the choice to given indices.
    """
    loss = loss_closure()
    (grad,) = torch.autograd.grad(loss, store.flat, allow_unused=True)
    grad = torch.zeros(len(store), dtype=DTYPE) if grad is None else grad.detach()
    rng = rng_for(seed, 0x6C)
    pool = np.arange(len(store)) if candidates is None else np.asarray(candidates)
    nonzero = pool[grad[pool].abs().numpy() > 0]
    take = min(count, len(nonzero))
    coords = list(rng.choice(nonzero, size=take, replace=False)) if take else []
    if len(coords) < count:
        rest = np.setdiff1d(pool, np.asarray(coords, dtype=np.int64))
        extra = min(count - len(coords), len(rest))
        coords += list(rng.choice(rest, size=extra, replace=False))
    report = GradcheckReport([int(i) for i in coords], [], [])
    for i in report.coords:
        with torch.no_grad():
            original = store.flat[i].item()
            store.flat[i] = original + h
            plus = float(loss_closure())
            store.flat[i] = original - h
            minus = float(loss_closure())
            store.flat[i] = original
        numeric = (plus - minus) / (2.0 * h)
        analytic = float(grad[i])
        report.analytic.append(analytic)
        report.numeric.append(numeric)
        report.relative_errors.append(relative_error(analytic, numeric))
    return report

"""
Regularized visibility estimation: the per-lobe prior Q-tilde is pulled
towards the field's visibility ratios while the residual is kept sparse.
"""

import torch

from sgir.pipeline.losses import kl_divergence
from sgir.sg.lobes import as_tensor

RESIDUAL_FLOOR = 1e-4


def rve_residual(q, eta):
    return (as_tensor(q) - as_tensor(eta)).abs().clamp(RESIDUAL_FLOOR, 1.0 - RESIDUAL_FLOOR)


def rve_loss(q, eta, epsilon=0.01):
    """mean KL(|Q - eta| || epsilon); gradients reach both Q and eta."""
    return kl_divergence(rve_residual(q, eta), epsilon).mean()


def rve_warmup_loss(q, eta):
    """L2 fit of Q to the detached ratios."""
    return ((as_tensor(q) - as_tensor(eta).detach()) ** 2).mean()


def blend_eta(eta, q):
    return 0.5 * (as_tensor(eta) + as_tensor(q).clamp(0.0, 1.0))


def matching_lobes(env, trained_env):
    """True when two mixtures share lobe axes and sharpness, so Q-tilde's lobe identity carries over."""
    if env.count != trained_env.count:
        return False
    a, b = env.lobes.detach(), trained_env.lobes.detach()
    return bool(torch.equal(a.lobe_axis.expand(env.count, 3), b.lobe_axis.expand(env.count, 3))
                and torch.equal(a.sharpness.expand(env.count, 1), b.sharpness.expand(env.count, 1)))

"""
Training losses. The per-sample losses are means over their batch, so chunked
sums of ``fraction * loss(chunk)`` reproduce the batch value. ``latent_kl`` is
nonlinear in its batch means and has to see the whole batch at once.
"""

import torch

from sgir.sg.lobes import as_tensor

BCE_CLAMP = 1e-6


def normal_loss(predicted, supervised, perturbed):
    """mean(|n - n_hat|^2 + |n - n'|^2) with n' the prediction at jittered points."""
    return (((predicted - supervised) ** 2).sum(-1) + ((predicted - perturbed) ** 2).sum(-1)).mean()


def visibility_bce(predicted, labels, clamp=BCE_CLAMP):
    p = as_tensor(predicted).clamp(clamp, 1.0 - clamp)
    t = as_tensor(labels)
    return -(t * torch.log(p) + (1.0 - t) * torch.log1p(-p)).mean()


def indirect_l1(predicted, target):
    """(1 / N) sum over samples of the L1 norm of the RGB difference."""
    return (as_tensor(predicted) - as_tensor(target)).abs().sum(-1).mean()


def rgb_mse(predicted, target):
    return ((as_tensor(predicted) - as_tensor(target)) ** 2).mean()


def smoothness_loss(decoded, decoded_perturbed):
    return ((decoded - decoded_perturbed) ** 2).sum(-1).mean()


def kl_divergence(p, q):
    """KL(p || q) between Bernoulli means, elementwise."""
    p = as_tensor(p)
    q = as_tensor(q)
    return p * torch.log(p / q) + (1.0 - p) * torch.log((1.0 - p) / (1.0 - q))


def latent_kl(z, rho=0.05, eps=1e-6):
    """Mean over channels of KL(rho || batch mean of z); zero when every channel mean is rho."""
    rho_hat = as_tensor(z).mean(0).clamp(eps, 1.0 - eps)
    return kl_divergence(torch.full_like(rho_hat, rho), rho_hat).mean()

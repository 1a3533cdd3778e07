"""Noise schedule and the deterministic sampling/inversion step algebra.

Indexing convention: ``alpha_bar`` has ``steps + 1`` entries with
``alpha_bar[0] == 1`` (clean) and strictly decreasing values toward the
noisy end. Inversion step t maps z_t -> z_{t+1} for t in [0, steps);
sampling step t maps z_t -> z_{t-1} for t in [1, steps]. With sigma = 0
the two updates are exact algebraic inverses when they share the same
noise prediction.
"""

from dataclasses import dataclass

import numpy as np


@dataclass
class Schedule:
    steps: int
    alpha_bar: np.ndarray  # (steps + 1,), alpha_bar[0] = 1, strictly decreasing
    sigma: np.ndarray  # (steps + 1,), all zeros for deterministic sampling

    def __post_init__(self):
        if len(self.alpha_bar) != self.steps + 1:
            raise ValueError("alpha_bar must have steps + 1 entries")
        if np.any(np.diff(self.alpha_bar) >= 0):
            raise ValueError("alpha_bar must be strictly decreasing")


def linear_schedule(steps, beta_start=8.5e-4, beta_end=1.2e-2, virtual_steps=1000):
    """Linear-beta schedule over ``virtual_steps``, strided down to ``steps``."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    betas = np.linspace(beta_start, beta_end, virtual_steps)
    abar_full = np.cumprod(1.0 - betas)
    idx = np.round(np.linspace(0, virtual_steps - 1, steps)).astype(int)
    alpha_bar = np.concatenate([[1.0], abar_full[idx]])
    return Schedule(steps=steps, alpha_bar=alpha_bar, sigma=np.zeros(steps + 1))


def ddim_step(z_t, eps, t, schedule: Schedule):
    """One deterministic sampling update z_t -> z_{t-1}, t in [1, steps]."""
    ab_t = schedule.alpha_bar[t]
    ab_prev = schedule.alpha_bar[t - 1]
    sigma = schedule.sigma[t]
    pred_x0 = (z_t - np.sqrt(1.0 - ab_t) * eps) / np.sqrt(ab_t)
    return np.sqrt(ab_prev) * pred_x0 + np.sqrt(1.0 - ab_prev - sigma**2) * eps


def ddim_invert_step(z_t, eps, t, schedule: Schedule):
    """One inversion update z_t -> z_{t+1}, t in [0, steps).

    Factored form sqrt(ab')*[z/sqrt(ab) + (sqrt(1/ab' - 1) - sqrt(1/ab - 1))*eps];
    expanding without the sqrt(ab') on the drift term is a common
    transcription slip that breaks the inverse-pair identity.
    """
    ab_t = schedule.alpha_bar[t]
    ab_next = schedule.alpha_bar[t + 1]
    scale = np.sqrt(ab_next / ab_t)
    drift = np.sqrt(ab_next) * (np.sqrt(1.0 / ab_next - 1.0) - np.sqrt(1.0 / ab_t - 1.0))
    return scale * z_t + drift * eps


def cfg(eps_cond, eps_uncond, scale):
    """Classifier-free guidance: extrapolate conditional past unconditional.

    Written in lerp form so scale 1 and scale 0 reproduce the respective
    prediction exactly.
    """
    eps_cond = np.asarray(eps_cond)
    eps_uncond = np.asarray(eps_uncond)
    if eps_cond.shape != eps_uncond.shape:
        raise ValueError(f"prediction shapes differ: {eps_cond.shape} vs {eps_uncond.shape}")
    return (1.0 - scale) * eps_uncond + scale * eps_cond

"""One-dimensional Gaussian mixtures over joint angles.

A mixture is parameterized by a 3m-vector: m means, m unconstrained
scale parameters (variance = softplus(scale) + VAR_FLOOR), and m
unconstrained prior logits projected onto the simplex by sparsemax, so
priors can be exactly zero. Components with zero prior are excluded
from the log-density and from sampling.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor, sparsemax

# rad^2; keeps the likelihood bounded on near-duplicate targets. Must stay
# well below the squared angle error budget: per-joint sampling noise is at
# least sqrt(VAR_FLOOR) radians, which maps to centimeters at metre reach.
VAR_FLOOR = 1e-6

_LOG_2PI = float(np.log(2 * np.pi))


def softplus(x):
    return np.logaddexp(0.0, x)


@dataclass(frozen=True)
class Neighborhood:
    center: float
    radius: float

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("neighborhood radius must be positive")

    @property
    def lo(self):
        return self.center - self.radius

    @property
    def hi(self):
        return self.center + self.radius


class GmmParams:
    """Immutable mixture with validated means/variances/priors."""

    def __init__(self, means, variances, priors):
        means = np.asarray(means, dtype=float)
        variances = np.asarray(variances, dtype=float)
        priors = np.asarray(priors, dtype=float)
        if not (means.shape == variances.shape == priors.shape) or means.ndim != 1:
            raise ValueError("means, variances, priors must be equal-length vectors")
        if abs(priors.sum() - 1.0) > 1e-9 or (priors < 0).any():
            raise ValueError("priors must be nonnegative and sum to 1")
        if (variances < VAR_FLOOR * (1 - 1e-12)).any():
            raise ValueError(f"variances must be >= {VAR_FLOOR}")
        if not (priors > 0).any():
            raise ValueError("at least one prior must be positive")
        self.means = means
        self.variances = variances
        self.priors = priors
        self.means.flags.writeable = False
        self.variances.flags.writeable = False
        self.priors.flags.writeable = False

    @classmethod
    def from_raw(cls, raw):
        """Build from an unconstrained 3m-vector [means, scales, prior logits]."""
        raw = np.asarray(raw, dtype=float)
        m = raw.size // 3
        if raw.size != 3 * m or m == 0:
            raise ValueError("raw parameter vector length must be a positive multiple of 3")
        return cls(raw[:m], softplus(raw[m:2 * m]) + VAR_FLOOR, sparsemax(raw[2 * m:]))

    @property
    def n_components(self):
        return self.means.size

    def log_prob(self, y):
        """log sum_j prior_j N(y; mean_j, var_j), log-sum-exp over active components."""
        active = self.priors > 0
        mu = self.means[active]
        var = self.variances[active]
        lw = np.log(self.priors[active])
        comp = lw - 0.5 * (_LOG_2PI + np.log(var)) - (y - mu) ** 2 / (2 * var)
        c = comp.max()
        return float(c + np.log(np.exp(comp - c).sum()))

    def mean(self):
        return float(np.dot(self.priors, self.means))

    def variance(self):
        mu = self.mean()
        return float(np.dot(self.priors, self.variances + (self.means - mu) ** 2))

    def sample(self, rng):
        j = rng.choice(self.n_components, p=self.priors)
        return float(rng.normal(self.means[j], np.sqrt(self.variances[j])))

    def sample_truncated(self, nb: Neighborhood, rng, max_proposals=1000):
        """Rejection-sample the mixture restricted to [lo, hi].

        After max_proposals rejected draws, fall back to the dominant
        component's mean clamped into the neighborhood, so path
        following always makes progress.
        """
        for _ in range(max_proposals):
            v = self.sample(rng)
            if nb.lo <= v <= nb.hi:
                return v
        dominant = self.means[int(np.argmax(self.priors))]
        return float(min(max(dominant, nb.lo), nb.hi))


def mixture_log_prob(means, variances, priors, y):
    """Differentiable per-row mixture log-density.

    means/variances/priors: Tensor (B, m); y: constant array (B,).
    Inactive components (prior exactly 0) contribute nothing and get no
    gradient through their mean/variance; the prior itself is handled
    by sparsemax's support-restricted Jacobian.
    """
    yb = np.asarray(y, dtype=float)[:, None]
    comp = ad.sub(ad.mul(ad.add(ad.log(variances), _LOG_2PI), -0.5),
                  ad.div(ad.mul(ad.sub(Tensor(yb), means), ad.sub(Tensor(yb), means)),
                         ad.mul(variances, 2.0)))
    mask = (priors.data > 0).astype(float)
    c = np.where(mask > 0, comp.data, -np.inf).max(axis=1, keepdims=True)
    # mask before exp so inactive components cannot overflow; their
    # contribution is prior * exp(0) = 0
    scaled = ad.exp(ad.mul(ad.sub(comp, Tensor(c)), Tensor(mask)))
    s = ad.tsum(ad.mul(priors, scaled), axis=1)
    return ad.add(ad.log(s), Tensor(c[:, 0]))

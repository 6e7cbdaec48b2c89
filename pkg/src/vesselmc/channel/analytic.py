"""Closed-form first-passage laws used as oracles and free-space baselines."""

from __future__ import annotations

import math

import numpy as np
from scipy import special


class GeometryError(ValueError):
    pass


def analytic_1d_first_passage(distance, velocity, diffusion, t):
    """Density of the first time a drifting 1-D Brownian particle travels ``distance``.

    ``f(t) = d / sqrt(4 pi D t^3) * exp(-(d - v t)^2 / (4 D t))`` (inverse
    Gaussian).  Vectorised over ``t``; returns 0 for ``t <= 0``.
    """
    if distance <= 0 or diffusion <= 0:
        raise ValueError("distance and diffusion must be > 0")
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros_like(t)
    pos = t > 0
    tp = t[pos]
    out[pos] = distance / np.sqrt(4.0 * np.pi * diffusion * tp**3) * np.exp(
        -((distance - velocity * tp) ** 2) / (4.0 * diffusion * tp)
    )
    return out if out.ndim else float(out)


def first_passage_cdf(distance, velocity, diffusion, t):
    """Cumulative of :func:`analytic_1d_first_passage`.

    ``Phi((v t - d)/s) + exp(v d / D) Phi(-(v t + d)/s)`` with ``s = sqrt(2 D t)``;
    the second term is summed in log space to avoid overflow at high Peclet.
    """
    t = np.asarray(t, dtype=np.float64)
    out = np.zeros_like(t)
    pos = t > 0
    tp = t[pos]
    s = np.sqrt(2.0 * diffusion * tp)
    first = special.ndtr((velocity * tp - distance) / s)
    second = np.exp(velocity * distance / diffusion + special.log_ndtr(-(velocity * tp + distance) / s))
    out[pos] = first + second
    return out if out.ndim else float(out)


def analytic_free_space_absorbing_sphere(distance, receiver_radius, diffusion, t):
    """Hitting-rate density and cumulative capture for a point source and absorbing sphere.

    Density ``(a/d) (d - a) / sqrt(4 pi D t^3) exp(-(d - a)^2 / (4 D t))``;
    cumulative ``(a/d) erfc((d - a) / sqrt(4 D t))``, tending to ``a/d``.
    """
    if not distance > receiver_radius > 0:
        raise GeometryError("need distance > receiver radius > 0")
    t = np.asarray(t, dtype=np.float64)
    gap = distance - receiver_radius
    ratio = receiver_radius / distance
    density = np.zeros_like(t)
    cumulative = np.zeros_like(t)
    pos = t > 0
    tp = t[pos]
    density[pos] = ratio * gap / np.sqrt(4.0 * np.pi * diffusion * tp**3) * np.exp(-(gap**2) / (4.0 * diffusion * tp))
    cumulative[pos] = ratio * special.erfc(gap / np.sqrt(4.0 * diffusion * tp))
    if density.ndim == 0:
        return float(density), float(cumulative)
    return density, cumulative


def inverse_gaussian_mode(distance, velocity, diffusion) -> float:
    """Location of the first-passage density maximum (closed form)."""
    mu = distance / velocity
    lam = distance**2 / (2.0 * diffusion)
    return mu * (math.sqrt(1.0 + (3.0 * mu / (2.0 * lam)) ** 2) - 3.0 * mu / (2.0 * lam))

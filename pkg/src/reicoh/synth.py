"""Seeded synthetic datasets for recovery checks and demos.

All randomness flows from ``numpy.random.Generator(PCG64(seed))``; child
streams come from ``SeedSequence.spawn`` so independent series never share
draws.
"""

from __future__ import annotations

import numpy as np

from .fitting import Dataset
from .models import MODELS


def rng(seed):
    return np.random.Generator(np.random.PCG64(seed))


def spawn(seed, n):
    """``n`` independent generators derived from one 64-bit seed."""
    return [np.random.Generator(np.random.PCG64(s)) for s in np.random.SeedSequence(seed).spawn(n)]


def synthesize(model_name, x, params, noise=0.0, seed=0, mode="relative", gen=None):
    """Evaluate a model and add Gaussian noise.

    mode="relative": σ_i = noise·|y_i|;  mode="absolute": σ_i = noise·max|y|.
    The returned Dataset carries σ whenever ``noise > 0``.
    """
    model = MODELS[model_name]
    x = np.asarray(x, dtype=float)
    y, _ = model.evaluate(x, params)
    if noise <= 0:
        return Dataset(x, y, x_unit=model.x_unit, y_unit=model.y_unit)
    if mode == "relative":
        sigma = noise * np.abs(y)
    elif mode == "absolute":
        sigma = np.full_like(y, noise * float(np.max(np.abs(y))))
    else:
        raise ValueError(f"unknown noise mode {mode!r}")
    sigma = np.where(sigma > 0, sigma, noise * float(np.max(np.abs(y))) or 1e-300)
    g = rng(seed) if gen is None else gen
    yn = y + sigma * g.standard_normal(y.size)
    return Dataset(x, yn, sigma, x_unit=model.x_unit, y_unit=model.y_unit)

"""Analytic backprop vs central finite differences over random networks."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .qnet import (
    backward, finite_difference_gradient, forward, init_network, max_relative_error, sample_masks,
)

DEFAULT_SHAPES = ([4, 64, 64, 2], [4, 16, 2], [3, 8, 8, 3], [4, 2])
TOLERANCE = 1e-4


class CheckResult(NamedTuple):
    layer_dims: list
    dropout: bool
    max_rel_error: float

    @property
    def passed(self) -> bool:
        return self.max_rel_error < TOLERANCE


def check_network(rng: np.random.Generator, layer_dims, dropout_rate: float,
                  batch: int = 3, h: float = 1e-5) -> CheckResult:
    """Random net, batch, actions and targets; compare the two gradient routes.

    Biases are randomised so no pre-activation sits exactly on the ReLU kink;
    targets sit ~0.1 from the prediction to keep the loss, and hence the
    finite-difference round-off, small.
    """
    net = init_network(layer_dims, rng, dropout_rate=dropout_rate)
    for b in net.biases:
        b[:] = rng.uniform(-0.1, 0.1, size=b.shape)
    x = rng.normal(size=(batch, layer_dims[0]))
    masks = sample_masks(net, batch, rng) if dropout_rate > 0 else None
    actions = rng.integers(layer_dims[-1], size=batch)
    q, cache = forward(net, x, masks=masks)
    targets = q[np.arange(batch), actions] + rng.normal(scale=0.1, size=batch)
    analytic = backward(net, cache, actions, targets)
    numeric = finite_difference_gradient(net, x, actions, targets, h=h, masks=masks)
    return CheckResult(list(layer_dims), masks is not None, max_relative_error(analytic, numeric))


def run_suite(n_nets: int = 20, seed: int = 0, shapes=DEFAULT_SHAPES) -> list[CheckResult]:
    """``n_nets`` checks cycling through ``shapes``; each full cycle flips dropout off/on."""
    rng = np.random.default_rng(seed)
    results = []
    for i in range(n_nets):
        dims = shapes[i % len(shapes)]
        rate = 0.5 if (i // len(shapes)) % 2 else 0.0
        results.append(check_network(rng, dims, rate))
    return results

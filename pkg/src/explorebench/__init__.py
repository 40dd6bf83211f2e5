"""Exploration strategies for DQN on CartPole and a two-armed bandit."""

import os

# the networks are tiny; BLAS worker threads only add scheduling overhead
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

__version__ = "0.1.0"

"""Synthetic data with the structure the detector is built to exploit:
attribute blocks that are internally correlated and mutually
independent in normal rows, with anomalies matching every marginal but
breaking the within-block correlation."""

import numpy as np

from .data import TabularDataset


def correlated_subsets(
    n_normal=400,
    n_anomaly=40,
    block_sizes=(3, 3),
    noise=0.1,
    seed=0,
    name="synthetic-corrsub",
):
    """Each block is driven by its own latent factor in normal rows;
    anomalous rows draw an independent factor per attribute instead, so
    their per-attribute distributions are identical but the joint
    structure is gone."""
    rng = np.random.default_rng(seed)
    d = int(sum(block_sizes))
    coeff = rng.uniform(0.6, 1.4, size=d) * rng.choice([-1.0, 1.0], size=d)

    def rows(count, shared_within_block):
        cols = []
        i = 0
        for size in block_sizes:
            factor = rng.standard_normal((count, 1))
            for _ in range(size):
                t = factor if shared_within_block else rng.standard_normal((count, 1))
                cols.append(coeff[i] * t + noise * rng.standard_normal((count, 1)))
                i += 1
        return np.hstack(cols)

    features = np.vstack([rows(n_normal, True), rows(n_anomaly, False)])
    labels = np.concatenate([np.zeros(n_normal, dtype=np.int64), np.ones(n_anomaly, dtype=np.int64)])
    return TabularDataset(name=name, features=features, labels=labels)

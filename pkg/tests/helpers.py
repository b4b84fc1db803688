"""Seeded random instances shared by the model tests and the acceptance suite."""
import numpy as np

from gwlcast.models import InputWindow, SequenceModel


def random_instance(kind, seed, hidden=4, n_layers=None, lookback=6, horizon=3, scale=0.5):
    """(model, window, target) with parameters uniform in [-scale, scale]."""
    rng = np.random.default_rng(seed)
    model = SequenceModel.zeros(kind, hidden, n_layers)
    model = model.with_params(rng.uniform(-scale, scale, model.n_params))
    window = InputWindow(rng.uniform(0, 1, (lookback, 3)), rng.uniform(0, 1, (horizon, 2)))
    target = rng.uniform(0, 1, horizon)
    return model, window, target

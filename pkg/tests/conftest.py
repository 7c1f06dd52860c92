import numpy as np
import pytest

from bootmatch.data_model import PanelDataset


def make_dataset(responses, group, t, features=None, ids=None):
    responses = np.asarray(responses, dtype=float)
    n = responses.shape[0]
    if features is None:
        features = np.arange(n, dtype=float)[:, None]
    return PanelDataset(features, group, responses, t, ids)


@pytest.fixture
def small_panel():
    rng = np.random.default_rng(3)
    n = 10
    group = np.array([1, 0, 0, 1, 0, 0, 1, 0, 0, 0])
    return PanelDataset(rng.normal(size=(n, 2)), group, rng.normal(size=(n, 12)), 6, [f"id{i}" for i in range(n)])

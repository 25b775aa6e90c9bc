import numpy as np
import pytest

from setgen.core import Dataset, SetSample


class OracleLabelPosterior:
    """Posterior uniform over each input's true set, zero elsewhere.

    Inputs are matched exactly; intended for separable end-to-end checks.
    """

    def __init__(self, truth_by_x: dict, universe: int):
        self.truth_by_x = truth_by_x
        self.universe = universe

    def posterior(self, x):
        probs = np.zeros(self.universe)
        members = sorted(self.truth_by_x[x])
        for m in members:
            probs[m] = 1.0 / len(members)
        return probs


@pytest.fixture
def tiny_label_dataset():
    samples = (
        SetSample(x=(0.0, 1.0), y=(0, 2)),
        SetSample(x=(1.0, 0.0), y=(1,)),
        SetSample(x=(0.5, 0.5), y=(0, 1, 2)),
    )
    return Dataset(kind="labels", samples=samples, universe=3, input_dim=2)

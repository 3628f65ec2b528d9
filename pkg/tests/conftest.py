import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from semnav.model import SemanticModel
from semnav.vocab import SignalVocabulary
from semnav.world import NONE_TYPE, HouseContext


@pytest.fixture
def small_vocab():
    return SignalVocabulary(("a", "b", "c"))  # 4 room-graph nodes


@pytest.fixture
def chain_house():
    """a - b - c - d, types 0..3 over 4 room types."""
    return HouseContext(
        room_types=(0, 1, 2, 3),
        adjacency=((0, 1), (1, 2), (2, 3)),
        n_room_types=4,
    )


def make_model(vocab: SignalVocabulary, prior: float = 0.5, **kwargs) -> SemanticModel:
    n = vocab.n_nodes
    m = np.full((n, n), prior)
    obj = np.full((n, vocab.n_objects), prior) if vocab.n_objects else None
    return SemanticModel(vocab, m, psi_obj_prior=obj, **kwargs)

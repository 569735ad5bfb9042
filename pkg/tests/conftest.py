import numpy as np
import pytest

from taxoenrich.embeddings import EmbeddingTable
from taxoenrich.taxonomy import Taxonomy

TOY_NAMES = {"cs": "cs", "ml": "ml", "sys": "sys",
             "dl": "dl", "svm": "svm", "os": "os"}
TOY_EDGES = {("cs", "ml"), ("cs", "sys"), ("ml", "dl"),
             ("ml", "svm"), ("sys", "os")}


@pytest.fixture
def toy_tax():
    return Taxonomy(TOY_NAMES, TOY_EDGES)


@pytest.fixture
def toy_table():
    rng = np.random.default_rng(7)
    rows = {n: rng.standard_normal(8).astype(np.float32) for n in TOY_NAMES}
    return EmbeddingTable(8, rows)

import numpy as np
import pytest

from figphm.corpus import PAD_TOKEN, UNK_TOKEN
from figphm.embeddings import EmbeddingTable


def make_table(word_vectors: dict[str, list[float]]) -> EmbeddingTable:
    """Small embedding table with the reserved PAD/UNK rows prepended."""
    dim = len(next(iter(word_vectors.values())))
    vocab = {PAD_TOKEN: 0, UNK_TOKEN: 1}
    rows = [np.zeros(dim), np.zeros(dim)]
    for word, vector in word_vectors.items():
        vocab[word] = len(rows)
        rows.append(np.asarray(vector, dtype=np.float64))
    return EmbeddingTable(vocab=vocab, matrix=np.vstack(rows))


@pytest.fixture
def tiny_table():
    return make_table({"a": [1.0], "b": [2.0], "c": [-1.0]})

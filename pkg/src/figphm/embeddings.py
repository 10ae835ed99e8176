"""Dense word-embedding tables: loading, random init, similarity queries,
and graph-based retrofitting.

Tables always reserve row 0 for PAD (kept all-zero) and row 1 for UNK, so
they can be dropped row-for-row into the CNN embedding layer.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import PAD_INDEX, PAD_TOKEN, UNK_INDEX, UNK_TOKEN
from .errors import DataError

log = logging.getLogger(__name__)

RESERVED_TOKENS = (PAD_TOKEN, UNK_TOKEN)

# Kim-style uniform range for randomly initialised word vectors.
RANDOM_INIT_BOUND = 0.25


@dataclass
class EmbeddingTable:
    """Vocabulary -> dense vector lookup backed by a |V| x d float64 matrix."""

    vocab: dict[str, int]
    matrix: np.ndarray
    n_duplicates: int = 0

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def __contains__(self, word: str) -> bool:
        return word in self.vocab

    def vector(self, word: str) -> np.ndarray:
        index = self.vocab.get(word)
        if index is None:
            raise KeyError(f"word not in vocabulary: {word!r}")
        return self.matrix[index]

    def words(self) -> list[str]:
        """Vocabulary in row order, reserved tokens included."""
        return sorted(self.vocab, key=self.vocab.get)


@dataclass
class OntologyGraph:
    """Undirected adjacency over words; multiword terms use underscores."""

    edges: dict[str, set[str]] = field(default_factory=dict)

    def add_edge(self, a: str, b: str) -> None:
        if a == b:
            return
        self.edges.setdefault(a, set()).add(b)
        self.edges.setdefault(b, set()).add(a)

    def neighbors(self, word: str) -> set[str]:
        return self.edges.get(word, set())

    def num_edges(self) -> int:
        return sum(len(n) for n in self.edges.values()) // 2


def _new_table(words: list[str], dim: int) -> tuple[dict[str, int], np.ndarray]:
    vocab = {PAD_TOKEN: PAD_INDEX, UNK_TOKEN: UNK_INDEX}
    for word in words:
        vocab[word] = len(vocab)
    matrix = np.zeros((len(vocab), dim), dtype=np.float64)
    return vocab, matrix


def load_table(path: str | Path, format: str = "glove_text",
               strip_prefix: str | None = None) -> EmbeddingTable:
    """Load a text embedding file.

    ``word2vec_text`` starts with a ``count dim`` header line; ``glove_text``
    has none (Numberbatch ships in this layout, pass ``strip_prefix="/c/en/"``
    to drop its language prefix). Duplicate words keep the first occurrence.
    """
    path = Path(path)
    if format not in ("word2vec_text", "glove_text"):
        raise ValueError(f"unknown embedding format: {format!r}")
    if not path.exists():
        raise DataError(f"embedding file not found: {path}")

    rows: list[tuple[str, list[float]]] = []
    seen: set[str] = set()
    n_duplicates = 0
    dim: int | None = None
    with path.open(encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            parts = line.rstrip("\n").split(" ")
            parts = [p for p in parts if p]
            if not parts:
                continue
            if format == "word2vec_text" and lineno == 1:
                if len(parts) != 2:
                    raise DataError(f"{path}: line 1: expected 'count dim' header")
                continue
            word, values = parts[0], parts[1:]
            if strip_prefix and word.startswith(strip_prefix):
                word = word[len(strip_prefix):]
            if dim is None:
                dim = len(values)
                if dim < 1:
                    raise DataError(f"{path}: line {lineno}: row has no vector values")
            if len(values) != dim:
                raise DataError(f"{path}: line {lineno}: expected {dim} dims, got {len(values)}")
            try:
                vector = [float(v) for v in values]
            except ValueError as exc:
                raise DataError(f"{path}: line {lineno}: non-numeric value ({exc})") from None
            if word in seen or word in RESERVED_TOKENS:
                n_duplicates += 1
                continue
            seen.add(word)
            rows.append((word, vector))

    if dim is None:
        raise DataError(f"{path}: no embedding rows found")
    if n_duplicates:
        log.warning("%s: %d duplicate word(s) ignored, first occurrence kept", path, n_duplicates)

    vocab, matrix = _new_table([w for w, _ in rows], dim)
    for word, vector in rows:
        matrix[vocab[word]] = vector
    return EmbeddingTable(vocab=vocab, matrix=matrix, n_duplicates=n_duplicates)


def save_table(table: EmbeddingTable, path: str | Path) -> None:
    """Serialize to glove_text at 6 decimal places; reserved rows are skipped."""
    path = Path(path)
    with path.open("w", encoding="utf-8") as handle:
        for word in table.words():
            if word in RESERVED_TOKENS:
                continue
            row = table.matrix[table.vocab[word]]
            handle.write(word + " " + " ".join(f"{v:.6f}" for v in row) + "\n")


def random_table(vocab: list[str], dim: int, seed: int) -> EmbeddingTable:
    """Uniform[-0.25, 0.25] vectors for every word, deterministic per seed.

    The PAD row stays all-zero; UNK gets a random row like any other word.
    """
    if dim < 1:
        raise ValueError(f"dim must be >= 1, got {dim}")
    if not vocab:
        raise ValueError("random_table requires a non-empty vocabulary")
    words = [w for w in vocab if w not in RESERVED_TOKENS]
    table_vocab, matrix = _new_table(words, dim)
    rng = np.random.default_rng(seed)
    matrix[UNK_INDEX:] = rng.uniform(-RANDOM_INIT_BOUND, RANDOM_INIT_BOUND,
                                     size=(len(table_vocab) - 1, dim))
    return EmbeddingTable(vocab=table_vocab, matrix=matrix)


def project_table(table: EmbeddingTable, vocab: list[str], seed: int) -> EmbeddingTable:
    """Re-key a table onto a target vocabulary (typically the corpus vocab).

    Words present in the source keep their vectors; missing words (UNK
    included) draw uniform[-0.25, 0.25] rows from a generator seeded once,
    in vocabulary order, so the result is deterministic.
    """
    words = [w for w in vocab if w not in RESERVED_TOKENS]
    target_vocab, matrix = _new_table(words, table.dim)
    rng = np.random.default_rng(seed)
    for word, index in target_vocab.items():
        if word == PAD_TOKEN:
            continue
        if word != UNK_TOKEN and word in table.vocab:
            matrix[index] = table.matrix[table.vocab[word]]
        else:
            matrix[index] = rng.uniform(-RANDOM_INIT_BOUND, RANDOM_INIT_BOUND, size=table.dim)
    return EmbeddingTable(vocab=target_vocab, matrix=matrix)


def cosine(u: np.ndarray, v: np.ndarray) -> float:
    """Cosine similarity; all-zero vectors (PAD rows) compare as 0 by convention."""
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    norm_u = np.linalg.norm(u)
    norm_v = np.linalg.norm(v)
    if norm_u == 0.0 or norm_v == 0.0:
        return 0.0
    return float(np.dot(u, v) / (norm_u * norm_v))


def nearest_neighbors(table: EmbeddingTable, word: str, k: int) -> list[tuple[str, float]]:
    """The k most cosine-similar words to ``word``.

    The query itself and the reserved rows never appear. Ties are broken by
    ascending word order; asking for more neighbors than exist returns the
    full ranked list.
    """
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if word not in table.vocab:
        raise KeyError(f"word not in vocabulary: {word!r}")
    query = table.vector(word)
    scored = []
    for other, index in table.vocab.items():
        if other == word or other in RESERVED_TOKENS:
            continue
        scored.append((other, cosine(query, table.matrix[index])))
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[:k]


def load_ontology(path: str | Path) -> OntologyGraph:
    """Read a lexicon file: one line per head word, ``head n1 n2 ...``.

    Edges are undirected and deduplicated; self-loops are dropped; a line
    with a single token contributes an isolated node.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"ontology file not found: {path}")
    graph = OntologyGraph()
    with path.open(encoding="utf-8") as handle:
        for line in handle:
            words = line.strip().lower().split()
            if not words:
                continue
            head = words[0]
            graph.edges.setdefault(head, set())
            for neighbor in words[1:]:
                graph.add_edge(head, neighbor)
    return graph


def retrofit(table: EmbeddingTable, graph: OntologyGraph, iterations: int = 10,
             alpha: float = 1.0, beta_mode: str = "inverse_degree") -> EmbeddingTable:
    """Pull word vectors toward their ontology neighbors.

    Runs Gauss-Seidel sweeps (ascending row index) of

        q_i <- (alpha * q0_i + sum_j beta_ij * q_j) / (alpha + sum_j beta_ij)

    over words that have at least one in-vocabulary neighbor, where q0 is the
    original vector and beta_ij is 1/|N(i)| (``inverse_degree``) or 1
    (``uniform``). Ontology words outside the vocabulary are ignored. The
    input table is not mutated.
    """
    if iterations < 0:
        raise ValueError(f"iterations must be >= 0, got {iterations}")
    if alpha <= 0:
        raise ValueError(f"alpha must be > 0, got {alpha}")
    if beta_mode not in ("inverse_degree", "uniform"):
        raise ValueError(f"unknown beta_mode: {beta_mode!r}")

    original = table.matrix
    matrix = original.copy()
    neighborhoods = _in_vocab_neighborhoods(table, graph)
    order = sorted(neighborhoods)  # ascending row index

    for _ in range(iterations):
        for index in order:
            neighbor_rows = neighborhoods[index]
            degree = len(neighbor_rows)
            beta = 1.0 / degree if beta_mode == "inverse_degree" else 1.0
            neighbor_sum = matrix[neighbor_rows].sum(axis=0)
            matrix[index] = (alpha * original[index] + beta * neighbor_sum) / (alpha + beta * degree)
    return EmbeddingTable(vocab=dict(table.vocab), matrix=matrix)


def retrofit_objective(original: EmbeddingTable, current: EmbeddingTable,
                       graph: OntologyGraph, alpha: float = 1.0,
                       beta_mode: str = "inverse_degree") -> float:
    """Quadratic energy that each retrofit sweep coordinate-minimizes.

    Written with symmetric edge weights (node terms absorb the degree
    scaling), so every exact coordinate update can only lower it:

        sum_i w_i * ||q_i - q0_i||^2 + sum_{i~j} ||q_i - q_j||^2

    with w_i = alpha * deg(i) for ``inverse_degree`` and w_i = alpha for
    ``uniform``; sums run over the in-vocabulary induced subgraph.
    """
    neighborhoods = _in_vocab_neighborhoods(original, graph)
    total = 0.0
    for index, neighbor_rows in neighborhoods.items():
        weight = alpha * len(neighbor_rows) if beta_mode == "inverse_degree" else alpha
        diff = current.matrix[index] - original.matrix[index]
        total += weight * float(np.dot(diff, diff))
        for j in neighbor_rows:
            if j > index:  # count each undirected edge once
                gap = current.matrix[index] - current.matrix[j]
                total += float(np.dot(gap, gap))
    return total


def _in_vocab_neighborhoods(table: EmbeddingTable, graph: OntologyGraph) -> dict[int, list[int]]:
    """Row index -> sorted neighbor row indices, restricted to the vocabulary."""
    neighborhoods: dict[int, list[int]] = {}
    for word, neighbors in graph.edges.items():
        index = table.vocab.get(word)
        if index is None or word in RESERVED_TOKENS:
            continue
        rows = sorted(table.vocab[n] for n in neighbors
                      if n in table.vocab and n not in RESERVED_TOKENS)
        if rows:
            neighborhoods[index] = rows
    return neighborhoods

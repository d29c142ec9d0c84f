"""
Encoder Backends for arsrank

Turns question and option texts into unit-norm pooled embeddings. Two
interchangeable backends sit behind one interface:

    ToyEncoder         - trainable hashed-bag-of-words encoder: tokens are
                         FNV-1a hashed into V buckets, their table rows are
                         mean-pooled and l2-normalized. Fully differentiable.
    PrecomputedEncoder - read-only store of vectors produced elsewhere (for
                         instance by a pretrained transformer), looked up by
                         text key "<item_id>:q" / "<item_id>:<letter>".

Store file format (JSON Lines, one record per line):
    {"key": "item-1:q", "vector": [0.12, -0.4, ...]}

Usage:
    from src.model.encoder import ToyEncoder, init_toy_params

    encoder = ToyEncoder(init_toy_params(65536, 64, rng))
    encoded = encoder.embed("item-1:q", "who inherits the estate")
"""

import json
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from src.utils.errors import (
    DegenerateNorm,
    DimensionMismatch,
    DuplicateKey,
    EmptyInput,
    FormatError,
    KeyNotFound,
)
from src.utils.logger import setup_logger

logger = setup_logger("Encoder")

VOCAB_SIZE = 65536
DEFAULT_EMBED_DIM = 64
NORM_TOLERANCE = 1e-5
MIN_NORM = 1e-12

FNV_OFFSET_BASIS = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK_64 = 0xFFFFFFFFFFFFFFFF


# --- Tokenizer ---

def fnv1a_64(data: bytes) -> int:
    h = FNV_OFFSET_BASIS
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & _MASK_64
    return h


def tokenize(text: str, vocab_size: int = VOCAB_SIZE) -> list[int]:
    """
    Lowercases, splits on Unicode whitespace and hashes each token into
    [0, vocab_size). Arabic and other scripts are hashed from their UTF-8
    bytes, so no vocabulary file is needed.

    Example:
        >>> tokenize("a a") == [tokenize("a")[0]] * 2
        True
    """
    return [fnv1a_64(tok.encode("utf-8")) % vocab_size for tok in text.lower().split()]


# --- Toy encoder math ---

@dataclass
class ToyEncoderParams:
    """Token embedding table, shape (V, d)."""

    table: np.ndarray

    @property
    def vocab_size(self) -> int:
        return int(self.table.shape[0])

    @property
    def embed_dim(self) -> int:
        return int(self.table.shape[1])


@dataclass(frozen=True)
class SparseRowGrad:
    """Gradient restricted to the table rows a text touched."""

    rows: np.ndarray    # (k,) unique row indices, ascending
    values: np.ndarray  # (k, d)


def init_toy_params(
    vocab_size: int, embed_dim: int, rng: np.random.Generator, scale: float = 0.05
) -> ToyEncoderParams:
    """Uniform(-scale, scale) table."""
    table = rng.uniform(-scale, scale, size=(vocab_size, embed_dim))
    return ToyEncoderParams(table=table.astype(np.float64))


def embed_toy(params: ToyEncoderParams, tokens) -> np.ndarray:
    """
    Mean of the token rows, then l2-normalized.

    Raises:
        EmptyInput: ``tokens`` is empty.
        DegenerateNorm: the pooled vector has norm below 1e-12.
    """
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.size == 0:
        raise EmptyInput("cannot embed an empty token sequence")
    pooled = params.table[tokens].mean(axis=0)
    norm = float(np.linalg.norm(pooled))
    if norm < MIN_NORM:
        raise DegenerateNorm(f"pooled embedding norm {norm:.3e} is below {MIN_NORM}")
    return pooled / norm


def embed_toy_backward(params: ToyEncoderParams, tokens, upstream_grad) -> SparseRowGrad:
    """
    Chain rule through mean pooling and l2 normalization.

    For y = x / ||x||, dL/dx = (I - y y^T) g / ||x||; each of the n tokens
    receives 1/n of it (duplicates accumulate).
    """
    tokens = np.asarray(tokens, dtype=np.int64)
    if tokens.size == 0:
        raise EmptyInput("cannot backpropagate through an empty token sequence")
    upstream_grad = np.asarray(upstream_grad, dtype=np.float64)

    pooled = params.table[tokens].mean(axis=0)
    norm = float(np.linalg.norm(pooled))
    if norm < MIN_NORM:
        raise DegenerateNorm(f"pooled embedding norm {norm:.3e} is below {MIN_NORM}")
    unit = pooled / norm
    d_pooled = (upstream_grad - unit * float(unit @ upstream_grad)) / norm

    rows, counts = np.unique(tokens, return_counts=True)
    values = (counts[:, None] / tokens.size) * d_pooled[None, :]
    return SparseRowGrad(rows=rows, values=values)


# --- Precomputed store ---

@dataclass(frozen=True)
class EmbeddingRecord:
    key: str
    vector: np.ndarray


class EmbeddingStore:
    """Read-only key -> unit vector map; all vectors share one dimension."""

    def __init__(self, records: Iterable[EmbeddingRecord]):
        self._vectors: dict[str, np.ndarray] = {}
        self.dim: Optional[int] = None
        for record in records:
            if record.key in self._vectors:
                raise DuplicateKey(f"duplicate embedding key '{record.key}'")
            vector = np.asarray(record.vector, dtype=np.float64)
            if self.dim is None:
                self.dim = int(vector.shape[0])
            elif vector.shape[0] != self.dim:
                raise DimensionMismatch(
                    f"key '{record.key}' has d={vector.shape[0]}, store has d={self.dim}"
                )
            vector.setflags(write=False)
            self._vectors[record.key] = vector

    def get(self, key: str) -> np.ndarray:
        try:
            return self._vectors[key]
        except KeyError:
            raise KeyNotFound(f"no embedding stored for key '{key}'") from None

    def __contains__(self, key: str) -> bool:
        return key in self._vectors

    def __len__(self) -> int:
        return len(self._vectors)


def load_precomputed(path: str) -> EmbeddingStore:
    """
    Loads a JSON Lines embedding store.

    If any vector deviates from unit norm by more than 1e-5, every vector
    is re-normalized and a warning is logged.

    Raises:
        FormatError: malformed line (with line number) or empty store.
        DimensionMismatch: vectors of different lengths.
        DuplicateKey: a key appears twice.
    """
    keys: list[str] = []
    vectors: list[list[float]] = []
    seen: set[str] = set()
    dim: Optional[int] = None

    with open(path, 'r', encoding='utf-8') as f:
        for line_no, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as e:
                raise FormatError(f"invalid JSON: {e.msg}", line=line_no) from e
            if not isinstance(obj, dict) or set(obj) != {"key", "vector"}:
                raise FormatError("record must be an object with exactly 'key' and 'vector'", line=line_no)
            key, vector = obj["key"], obj["vector"]
            if not isinstance(key, str):
                raise FormatError("'key' must be a string", line=line_no)
            if (
                not isinstance(vector, list)
                or not vector
                or not all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in vector)
            ):
                raise FormatError("'vector' must be a nonempty list of numbers", line=line_no)
            if not all(math.isfinite(x) for x in vector):
                raise FormatError("'vector' contains NaN or Inf", line=line_no)
            if key in seen:
                raise DuplicateKey(f"line {line_no}: duplicate embedding key '{key}'")
            if dim is None:
                dim = len(vector)
            elif len(vector) != dim:
                raise DimensionMismatch(f"line {line_no}: d={len(vector)}, expected d={dim}")
            seen.add(key)
            keys.append(key)
            vectors.append(vector)

    if not keys:
        raise FormatError(f"embedding store {path} holds no records")

    matrix = np.asarray(vectors, dtype=np.float64)
    norms = np.linalg.norm(matrix, axis=1)
    if np.any(norms < MIN_NORM):
        bad = keys[int(np.argmin(norms))]
        raise DegenerateNorm(f"embedding '{bad}' has zero norm")
    if np.any(np.abs(norms - 1.0) > NORM_TOLERANCE):
        logger.warning(
            f"[STORE_RENORMALIZE] {path}: max |norm - 1| = {np.max(np.abs(norms - 1.0)):.3e}; "
            f"re-normalizing all {len(keys)} vectors"
        )
        matrix = matrix / norms[:, None]

    store = EmbeddingStore(EmbeddingRecord(k, matrix[i]) for i, k in enumerate(keys))
    logger.info(f"[STORE_LOAD] {path}: {len(store)} vectors, d={store.dim}")
    return store


def save_precomputed(records: Iterable[EmbeddingRecord], path: str) -> int:
    """Writes records as JSON Lines sorted by key; returns the record count."""
    ordered = sorted(records, key=lambda r: r.key)
    with open(path, 'w', encoding='utf-8') as f:
        for record in ordered:
            payload = {"key": record.key, "vector": [float(x) for x in record.vector]}
            f.write(json.dumps(payload, ensure_ascii=False) + "\n")
    logger.info(f"[STORE_SAVE] {path}: {len(ordered)} vectors")
    return len(ordered)


def get_embedding(store: EmbeddingStore, key: str) -> np.ndarray:
    """Exact-match lookup; raises KeyNotFound."""
    return store.get(key)


# --- Backend interface ---

@dataclass(frozen=True)
class EncodedText:
    """One embedded text plus what its backward pass needs."""

    key: str
    vector: np.ndarray
    tokens: tuple = ()


class EncoderBackend(ABC):
    trainable: bool = False

    @property
    @abstractmethod
    def embed_dim(self) -> int: ...

    @abstractmethod
    def embed(self, key: str, text: str) -> EncodedText: ...

    def backward(self, encoded: EncodedText, upstream_grad: np.ndarray) -> Optional[SparseRowGrad]:
        """Frozen backends have no parameters to update."""
        return None


class ToyEncoder(EncoderBackend):
    trainable = True

    def __init__(self, params: ToyEncoderParams):
        self.params = params

    @property
    def embed_dim(self) -> int:
        return self.params.embed_dim

    def embed(self, key: str, text: str) -> EncodedText:
        tokens = tokenize(text, self.params.vocab_size)
        if not tokens:
            raise EmptyInput(f"text for '{key}' contains no tokens")
        return EncodedText(key=key, vector=embed_toy(self.params, tokens), tokens=tuple(tokens))

    def backward(self, encoded: EncodedText, upstream_grad: np.ndarray) -> SparseRowGrad:
        return embed_toy_backward(self.params, encoded.tokens, upstream_grad)


class PrecomputedEncoder(EncoderBackend):
    def __init__(self, store: EmbeddingStore):
        self.store = store

    @property
    def embed_dim(self) -> int:
        return int(self.store.dim or 0)

    def embed(self, key: str, text: str) -> EncodedText:
        return EncodedText(key=key, vector=get_embedding(self.store, key))

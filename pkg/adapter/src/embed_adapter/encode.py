"""Corpus parsing, encoders, and the binary writer."""

from __future__ import annotations

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"MNIDEMB1"
VERSION = 1
POOLINGS = ("mean", "cls")


class EncoderResolutionError(RuntimeError):
    """The model identifier could not be turned into a working encoder."""


class NonFiniteOutput(RuntimeError):
    """An encoder produced NaN or infinite values."""


def read_corpus_texts(path: str | Path) -> list[str]:
    texts = []
    with open(path, "r", encoding="utf-8") as handle:
        for lineno, line in enumerate(handle, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                texts.append(str(obj["text"]))
            except (json.JSONDecodeError, KeyError) as exc:
                raise ValueError(f"line {lineno}: not a corpus record ({exc})") from exc
    return texts


class HashingEncoder:
    """Deterministic character-trigram hashing encoder.

    Token vectors are signed hash buckets of character trigrams; "cls"
    pooling returns the first token's vector, "mean" averages all tokens.
    Component 0 carries a constant bias so no output is the zero vector
    (empty text included), keeping downstream normalization valid.
    """

    def __init__(self, dim: int):
        if dim < 2:
            raise EncoderResolutionError("hash encoder needs dim >= 2")
        self.dim = dim

    def _token_vector(self, token: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        padded = f"^{token}$"
        for i in range(len(padded) - 2):
            digest = hashlib.blake2b(
                padded[i : i + 3].encode("utf-8"), digest_size=8
            ).digest()
            value = int.from_bytes(digest, "little")
            bucket = 1 + (value >> 1) % (self.dim - 1)
            sign = 1.0 if value & 1 else -1.0
            vec[bucket] += sign
        return vec

    def encode(self, texts: list[str], pooling: str) -> np.ndarray:
        out = np.zeros((len(texts), self.dim), dtype=np.float64)
        for row, text in enumerate(texts):
            tokens = text.split()
            if tokens:
                vectors = [self._token_vector(t) for t in tokens]
                if pooling == "cls":
                    out[row] = vectors[0]
                else:
                    out[row] = np.mean(vectors, axis=0)
            out[row, 0] += 1.0  # bias slot; empty text stays non-zero
        return out.astype(np.float32)


class SentenceTransformerEncoder:
    """Wrapper around a sentence-transformers model id."""

    def __init__(self, model_name: str):
        try:
            from sentence_transformers import SentenceTransformer
        except ImportError as exc:
            raise EncoderResolutionError(
                f"cannot encode with {model_name!r}: sentence-transformers "
                "is not installed"
            ) from exc
        try:
            self._model = SentenceTransformer(model_name)
        except Exception as exc:
            raise EncoderResolutionError(
                f"model {model_name!r} could not be loaded: {exc}"
            ) from exc
        self.dim = int(self._model.get_sentence_embedding_dimension())

    def encode(self, texts: list[str], pooling: str) -> np.ndarray:
        # The library applies its own configured pooling; "cls" is honored
        # only by models that expose token embeddings with a CLS slot.
        if pooling == "cls":
            features = self._model.encode(
                texts, output_value="token_embeddings", convert_to_numpy=True
            )
            rows = [np.asarray(tokens)[0] for tokens in features]
            return np.stack(rows).astype(np.float32)
        return np.asarray(
            self._model.encode(texts, convert_to_numpy=True), dtype=np.float32
        )


def resolve_encoder(model: str):
    if model.startswith("hash:"):
        try:
            return HashingEncoder(int(model.split(":", 1)[1]))
        except ValueError as exc:
            raise EncoderResolutionError(f"bad hash encoder spec {model!r}") from exc
    return SentenceTransformerEncoder(model)


def write_matrix(path: str | Path, values: np.ndarray) -> None:
    values = np.asarray(values, dtype=np.float32)
    count, dim = values.shape
    with open(path, "wb") as handle:
        handle.write(MAGIC)
        handle.write(struct.pack("<IQI", VERSION, count, dim))
        handle.write(values.astype("<f4").tobytes(order="C"))


def embed_corpus(
    corpus_path: str | Path,
    model: str,
    pooling: str,
    out_path: str | Path,
) -> dict:
    """Encode every corpus line and write the matrix plus its metadata sidecar."""
    if pooling not in POOLINGS:
        raise ValueError(f"pooling must be one of {POOLINGS}")
    texts = read_corpus_texts(corpus_path)
    encoder = resolve_encoder(model)
    if encoder.dim < 1:
        raise EncoderResolutionError(f"encoder {model!r} reports zero dimension")
    values = encoder.encode(texts, pooling)
    if values.shape != (len(texts), encoder.dim):
        raise NonFiniteOutput(
            f"encoder returned shape {values.shape}, expected {(len(texts), encoder.dim)}"
        )
    if not np.all(np.isfinite(values)):
        raise NonFiniteOutput("encoder produced non-finite values")
    write_matrix(out_path, values)
    meta = {
        "model": model,
        "pooling": pooling,
        "dim": int(encoder.dim),
        "count": len(texts),
    }
    meta_path = Path(str(out_path) + ".meta.json")
    meta_path.write_text(json.dumps(meta, indent=2) + "\n", encoding="utf-8")
    return meta

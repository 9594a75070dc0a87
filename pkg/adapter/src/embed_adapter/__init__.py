"""Turn a JSONL utterance corpus into the engine's binary embedding format.

The output file layout (shared contract with the discovery engine): magic
bytes ``MNIDEMB1``, little-endian u32 version (1), u64 row count, u32
dimension, then count*dim IEEE-754 float32 values in row-major order. A
``<out>.meta.json`` sidecar records the model, pooling mode, dimension and
count, so every produced file is self-describing.

Encoders are resolved by name: ``hash:<dim>`` is a built-in deterministic
character-n-gram hashing encoder (no downloads, useful for tests and smoke
runs); any other name is treated as a sentence-transformers model id.
"""

from .encode import (
    EncoderResolutionError,
    NonFiniteOutput,
    embed_corpus,
    resolve_encoder,
)

__all__ = [
    "EncoderResolutionError",
    "NonFiniteOutput",
    "embed_corpus",
    "resolve_encoder",
]

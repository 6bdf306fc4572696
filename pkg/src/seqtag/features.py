"""Handcrafted indicator features (plus optional dense word-vector
features) for the classical linear-chain CRF.

Word context (previous/current/next surface, sentence-initial/final
flags), character affixes of length 1-3 over Unicode scalar values,
hyphen and digit indicators, and a decile position bucket. Feature
vectors are sparse string-keyed maps; indicators carry value 1.0.
"""

from __future__ import annotations

from seqtag.embeddings import embed

_ASCII_DIGITS = set("0123456789")
# Myanmar digits occupy U+1040 through U+1049
_MYANMAR_DIGITS = {chr(cp) for cp in range(0x1040, 0x104A)}
_DIGITS = _ASCII_DIGITS | _MYANMAR_DIGITS


def has_digit(surface):
    return any(ch in _DIGITS for ch in surface)


def extract_features(sentence, i, use_embeddings=False, embeddings=None):
    """Sparse feature map for position i of a sentence.

    With use_embeddings, components of the composed word vector are added
    as dense features emb0..emb{dim-1}.
    """
    n = len(sentence)
    if not 0 <= i < n:
        raise IndexError(f"position {i} outside sentence of length {n}")
    if use_embeddings and embeddings is None:
        raise ValueError("use_embeddings requires an embedding table")

    tokens = sentence.tokens
    surface = tokens[i].surface
    features = {f"w0={surface}": 1.0}

    if i == 0:
        features["BOS"] = 1.0
        features["first_word"] = 1.0
    else:
        features[f"w-1={tokens[i - 1].surface}"] = 1.0
    if i == n - 1:
        features["EOS"] = 1.0
        features["last_word"] = 1.0
    else:
        features[f"w+1={tokens[i + 1].surface}"] = 1.0

    for k in (1, 2, 3):
        if len(surface) >= k:
            features[f"pre{k}={surface[:k]}"] = 1.0
            features[f"suf{k}={surface[-k:]}"] = 1.0

    if "-" in surface:
        features["has_hyphen"] = 1.0
    if has_digit(surface):
        features["has_digit"] = 1.0

    features[f"pos_bucket={10 * i // n}"] = 1.0

    if use_embeddings:
        vector = embed(embeddings, surface)
        for k, component in enumerate(vector):
            if component != 0.0:
                features[f"emb{k}"] = float(component)
    return features


def sentence_features(sentence, use_embeddings=False, embeddings=None):
    return [
        extract_features(sentence, i, use_embeddings, embeddings)
        for i in range(len(sentence))
    ]

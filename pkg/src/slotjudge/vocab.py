"""Closed word-level vocabulary for the synthetic world.

Token ids are stable for a fixed world configuration; checkpoints record a
hash of the vocabulary file so a mismatched vocab cannot be silently loaded.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

# Reserved token strings, in the order they occupy the first vocabulary slots.
PAD = "<pad>"
SCENE_START = "<scene>"
SCENE_END = "</scene>"
AUTH_START = "<|auth_start|>"
AUTH_END = "<|auth_end|>"
REASON_START = "<|reason_start|>"
REASON_END = "<|reason_end|>"
UNKNOWN = "<unknown>"
YES = "<yes>"
NO = "<no>"

RESERVED_TOKENS = (
    PAD,
    SCENE_START,
    SCENE_END,
    AUTH_START,
    AUTH_END,
    REASON_START,
    REASON_END,
    UNKNOWN,
    YES,
    NO,
)


class VocabError(ValueError):
    pass


class OutOfVocabularyError(VocabError):
    def __init__(self, word: str):
        super().__init__(f"word not in vocabulary: {word!r}")
        self.word = word


@dataclass(frozen=True)
class Vocabulary:
    """Immutable token table. Index order is contractual."""

    tokens: tuple[str, ...]
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        index = {}
        for i, tok in enumerate(self.tokens):
            if tok in index:
                raise VocabError(f"duplicate token: {tok!r}")
            index[tok] = i
        for tok in RESERVED_TOKENS:
            if tok not in index:
                raise VocabError(f"missing reserved token: {tok!r}")
        object.__setattr__(self, "_index", index)

    @property
    def size(self) -> int:
        return len(self.tokens)

    def id(self, word: str) -> int:
        try:
            return self._index[word]
        except KeyError:
            raise OutOfVocabularyError(word) from None

    def __contains__(self, word: str) -> bool:
        return word in self._index

    # Reserved-token ids, used throughout template assembly and judging.
    @property
    def pad_id(self) -> int:
        return self._index[PAD]

    @property
    def scene_start_id(self) -> int:
        return self._index[SCENE_START]

    @property
    def scene_end_id(self) -> int:
        return self._index[SCENE_END]

    @property
    def auth_start_id(self) -> int:
        return self._index[AUTH_START]

    @property
    def auth_end_id(self) -> int:
        return self._index[AUTH_END]

    @property
    def reason_start_id(self) -> int:
        return self._index[REASON_START]

    @property
    def reason_end_id(self) -> int:
        return self._index[REASON_END]

    @property
    def unknown_id(self) -> int:
        return self._index[UNKNOWN]

    @property
    def yes_id(self) -> int:
        return self._index[YES]

    @property
    def no_id(self) -> int:
        return self._index[NO]

    def encode(self, words: Sequence[str]) -> list[int]:
        return [self.id(w) for w in words]

    def decode(self, ids: Iterable[int]) -> list[str]:
        out = []
        for i in ids:
            if not 0 <= i < len(self.tokens):
                raise VocabError(f"token id out of range: {i}")
            out.append(self.tokens[i])
        return out

    def to_json(self) -> str:
        reserved = {name: self._index[tok] for name, tok in RESERVED_NAMES.items()}
        return json.dumps(
            {"tokens": list(self.tokens), "reserved": reserved},
            indent=None,
            separators=(",", ":"),
            sort_keys=True,
        )

    def content_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    def save(self, path) -> None:
        with open(path, "w") as f:
            f.write(self.to_json())
            f.write("\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path) as f:
            obj = json.load(f)
        vocab = cls(tokens=tuple(obj["tokens"]))
        for name, idx in obj.get("reserved", {}).items():
            tok = RESERVED_NAMES.get(name)
            if tok is None or vocab.id(tok) != idx:
                raise VocabError(f"reserved index mismatch for {name}")
        return vocab

    @classmethod
    def from_words(cls, words: Iterable[str]) -> "Vocabulary":
        """Reserved tokens first, then the given content words (deduplicated,
        order-preserving)."""
        seen = dict.fromkeys(RESERVED_TOKENS)
        for w in words:
            if w in RESERVED_TOKENS:
                raise VocabError(f"content word collides with reserved token: {w!r}")
            seen.setdefault(w)
        return cls(tokens=tuple(seen))


RESERVED_NAMES = {
    "PAD": PAD,
    "SCENE_START": SCENE_START,
    "SCENE_END": SCENE_END,
    "AUTH_START": AUTH_START,
    "AUTH_END": AUTH_END,
    "REASON_START": REASON_START,
    "REASON_END": REASON_END,
    "UNKNOWN": UNKNOWN,
    "YES": YES,
    "NO": NO,
}


def build_vocabulary(world_config) -> Vocabulary:
    """All words the world generator or reason generator can emit, in a
    deterministic order, plus the reserved tokens."""
    return Vocabulary.from_words(world_config.all_words())

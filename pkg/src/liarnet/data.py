"""LIAR TSV parsing, tokenization, vocabulary, and fixed-length encoding.

The input format is a UTF-8 TSV with 14 columns per line: id, label,
statement, subjects, speaker, speaker's job, state, party, five credit-history
count columns, and context. Labels are the six veracity classes in
``LABELS``. The five count columns are read in file order and reported under
the canonical ``COUNT_LABELS`` in that same order; swap ``encode_pad`` inputs
or this table if a distribution with a different column layout appears.
"""

from __future__ import annotations

import hashlib
import json
import string
from collections import Counter
from dataclasses import dataclass
from pathlib import Path

import numpy as np

LABELS = ("pants-fire", "false", "barely-true", "half-true", "mostly-true", "true")
LABEL_TO_INDEX = {label: i for i, label in enumerate(LABELS)}
NUM_CLASSES = len(LABELS)

# Canonical order for the credit-history counts, least to most truthful.
COUNT_LABELS = ("pants-fire", "false", "barely-true", "half-true", "mostly-true")

SEQ_LENGTHS = {"statement": 50, "type": 5, "job": 20, "context": 25}

PAD_ID = 0
UNK_ID = 1
PAD_TOKEN = "<pad>"
UNK_TOKEN = "<unk>"

# Sizes of the distributed train/valid/test splits; deviations are reported,
# never silently accepted.
EXPECTED_SPLIT_SIZES = {"train": 10269, "valid": 1284, "test": 1266}

_EXPECTED_COLUMNS = 14


class ParseError(ValueError):
    """A malformed LIAR TSV line, with file and line number."""


@dataclass
class LiarRecord:
    """One parsed row: label, statement, profile attributes, credit counts."""

    id: str
    label: str
    statement: str
    statement_type: str
    speaker: str
    speaker_job: str
    state: str
    party: str
    counts: tuple
    context: str


def parse_tsv(path):
    """Parse a LIAR TSV file into records.

    Raises :class:`ParseError` naming the line for a wrong column count, an
    unknown label, a non-integer or negative count, or an empty statement.
    """
    path = Path(path)
    records = []
    with path.open("r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n").rstrip("\r")
            if not line:
                continue
            cols = line.split("\t")
            if len(cols) != _EXPECTED_COLUMNS:
                raise ParseError(f"{path}:{lineno}: expected {_EXPECTED_COLUMNS} "
                                 f"tab-separated columns, got {len(cols)}")
            cols = [c.strip() for c in cols]
            label = cols[1].lower()
            if label not in LABEL_TO_INDEX:
                raise ParseError(f"{path}:{lineno}: unknown label {cols[1]!r}")
            if not cols[2]:
                raise ParseError(f"{path}:{lineno}: empty statement")
            counts = []
            for raw in cols[8:13]:
                try:
                    value = int(raw)
                except ValueError:
                    raise ParseError(f"{path}:{lineno}: count column {raw!r} "
                                     "is not an integer") from None
                if value < 0:
                    raise ParseError(f"{path}:{lineno}: negative count {value}")
                counts.append(value)
            records.append(LiarRecord(
                id=cols[0], label=label, statement=cols[2], statement_type=cols[3],
                speaker=cols[4], speaker_job=cols[5], state=cols[6], party=cols[7],
                counts=tuple(counts), context=cols[13],
            ))
    return records


def tokenize(text):
    """Lowercase, split on whitespace, strip outer punctuation, drop empties."""
    tokens = []
    for raw in text.lower().split():
        token = raw.strip(string.punctuation)
        if token:
            tokens.append(token)
    return tokens


def categorical_token(cell):
    """Normalize a speaker/party/state cell into one categorical token
    (empty cell yields '')."""
    return cell.strip().lower()


def encode_label(label):
    """Map a label string to its class index (ordinal in truthfulness)."""
    try:
        return LABEL_TO_INDEX[label]
    except KeyError:
        raise ValueError(f"unknown label {label!r}; expected one of {LABELS}") from None


def decode_label(index):
    if not 0 <= index < NUM_CLASSES:
        raise ValueError(f"label index {index} out of range [0, {NUM_CLASSES})")
    return LABELS[index]


def encode_pad(tokens, vocab, max_len):
    """Encode up to ``max_len`` tokens then post-pad with the padding id.

    Over-length sequences keep their head; the tail is truncated.
    """
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    ids = [vocab.id_for(t) for t in tokens[:max_len]]
    ids.extend([PAD_ID] * (max_len - len(ids)))
    return np.array(ids, dtype=np.int64)


def credit_special_feature(counts):
    """One-hot at the argmax of the five credit counts.

    Ties break to the lowest index; all-zero counts give the all-zero vector
    (no evidence for any column).
    """
    counts = np.asarray(counts, dtype=np.float64)
    if counts.shape != (5,):
        raise ValueError(f"expected 5 counts, got shape {counts.shape}")
    out = np.zeros(5, dtype=np.float64)
    if counts.max() > 0:
        out[int(np.argmax(counts))] = 1.0
    return out


class Vocab:
    """Token-to-id map with id 0 reserved for padding and id 1 for unknown."""

    def __init__(self, token_to_id):
        for token, idx in token_to_id.items():
            if idx < 2:
                raise ValueError(f"token {token!r} assigned reserved id {idx}")
        ids = sorted(token_to_id.values())
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate ids in vocabulary")
        self.token_to_id = dict(token_to_id)

    def __len__(self):
        # table size including the two reserved rows
        return (max(self.token_to_id.values()) + 1) if self.token_to_id else 2

    def __contains__(self, token):
        return token in self.token_to_id

    def id_for(self, token):
        return self.token_to_id.get(token, UNK_ID)

    def tokens_by_id(self):
        """All tokens ordered by id, starting at id 2."""
        return [t for t, _ in sorted(self.token_to_id.items(), key=lambda kv: kv[1])]

    def to_json(self):
        return json.dumps({"format": "liar-vocab", "version": 1,
                           "tokens": self.tokens_by_id()}, separators=(",", ":"))

    @classmethod
    def from_json(cls, text):
        payload = json.loads(text)
        if payload.get("format") != "liar-vocab":
            raise ValueError("not a vocabulary file")
        return cls({t: i + 2 for i, t in enumerate(payload["tokens"])})

    def sha256(self):
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()


def _text_token_streams(record):
    return {
        "statement": tokenize(record.statement),
        # subjects come comma-delimited in the distribution
        "type": tokenize(record.statement_type.replace(",", " ")),
        "job": tokenize(record.speaker_job),
        "context": tokenize(record.context),
    }


def _categorical_tokens(record):
    return {
        "speaker": categorical_token(record.speaker),
        "party": categorical_token(record.party),
        "state": categorical_token(record.state),
    }


def build_vocab(records, min_count=1):
    """Build a deterministic vocabulary over all tokenized text attributes.

    Ids are assigned by (count descending, token ascending) starting at 2;
    tokens below ``min_count`` fall back to the unknown id.
    """
    if not records:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    counter = Counter()
    for record in records:
        for tokens in _text_token_streams(record).values():
            counter.update(tokens)
        for token in _categorical_tokens(record).values():
            if token:
                counter[token] += 1
    ranked = sorted((token for token, c in counter.items() if c >= min_count),
                    key=lambda t: (-counter[t], t))
    if not ranked:
        raise ValueError(f"no token reaches min_count={min_count}")
    return Vocab({token: i + 2 for i, token in enumerate(ranked)})


@dataclass
class EncodedExample:
    """Fully numeric form of one record: padded id sequences, count vectors,
    label index."""

    statement_ids: np.ndarray  # int64[50]
    type_ids: np.ndarray       # int64[5]
    job_ids: np.ndarray        # int64[20]
    context_ids: np.ndarray    # int64[25]
    speaker_id: np.ndarray     # int64[1]
    party_id: np.ndarray       # int64[1]
    state_id: np.ndarray       # int64[1]
    counts: np.ndarray         # float64[5]
    special_feature: np.ndarray  # float64[5]
    label_index: int


def encode_record(record, vocab):
    texts = _text_token_streams(record)
    cats = _categorical_tokens(record)

    def single(token):
        return np.array([vocab.id_for(token) if token else PAD_ID], dtype=np.int64)

    return EncodedExample(
        statement_ids=encode_pad(texts["statement"], vocab, SEQ_LENGTHS["statement"]),
        type_ids=encode_pad(texts["type"], vocab, SEQ_LENGTHS["type"]),
        job_ids=encode_pad(texts["job"], vocab, SEQ_LENGTHS["job"]),
        context_ids=encode_pad(texts["context"], vocab, SEQ_LENGTHS["context"]),
        speaker_id=single(cats["speaker"]),
        party_id=single(cats["party"]),
        state_id=single(cats["state"]),
        counts=np.asarray(record.counts, dtype=np.float64),
        special_feature=credit_special_feature(record.counts),
        label_index=encode_label(record.label),
    )


@dataclass
class Batch:
    """A batch of encoded examples as stacked arrays (leading batch axis)."""

    statement_ids: np.ndarray
    type_ids: np.ndarray
    job_ids: np.ndarray
    context_ids: np.ndarray
    speaker_id: np.ndarray
    party_id: np.ndarray
    state_id: np.ndarray
    counts: np.ndarray
    special_feature: np.ndarray
    labels: np.ndarray

    def __len__(self):
        return self.labels.shape[0]


_SEQUENCE_FIELDS = ("statement_ids", "type_ids", "job_ids", "context_ids",
                    "speaker_id", "party_id", "state_id")
_CACHE_FIELDS = _SEQUENCE_FIELDS + ("counts", "special_feature", "label_index")


class EncodedDataset:
    """Encoded examples stored as contiguous arrays, sliceable into batches."""

    def __init__(self, arrays, labels):
        self.arrays = arrays
        self.labels = labels

    @classmethod
    def from_examples(cls, examples):
        if not examples:
            raise ValueError("no examples to stack")
        arrays = {}
        for name in _SEQUENCE_FIELDS:
            arrays[name] = np.stack([getattr(e, name) for e in examples]).astype(np.int64)
        arrays["counts"] = np.stack([e.counts for e in examples]).astype(np.float64)
        arrays["special_feature"] = np.stack(
            [e.special_feature for e in examples]).astype(np.float64)
        labels = np.array([e.label_index for e in examples], dtype=np.int64)
        return cls(arrays, labels)

    def __len__(self):
        return self.labels.shape[0]

    def batch(self, indices):
        indices = np.asarray(indices)
        return Batch(
            **{name: self.arrays[name][indices] for name in _SEQUENCE_FIELDS},
            counts=self.arrays["counts"][indices],
            special_feature=self.arrays["special_feature"][indices],
            labels=self.labels[indices],
        )

    def example(self, i):
        """Single example as an :class:`EncodedExample` view."""
        return EncodedExample(
            **{name: self.arrays[name][i] for name in _SEQUENCE_FIELDS},
            counts=self.arrays["counts"][i],
            special_feature=self.arrays["special_feature"][i],
            label_index=int(self.labels[i]),
        )

    def to_jsonl(self, path):
        """Write a versioned line-delimited cache; byte-identical across runs."""
        path = Path(path)
        with path.open("w", encoding="utf-8") as fh:
            header = {"format": "liar-encoded-examples", "version": 1,
                      "fields": list(_CACHE_FIELDS),
                      "lengths": {name: int(self.arrays[name].shape[1])
                                  for name in _SEQUENCE_FIELDS}}
            fh.write(json.dumps(header, separators=(",", ":")) + "\n")
            for i in range(len(self)):
                row = {name: [int(v) for v in self.arrays[name][i]]
                       for name in _SEQUENCE_FIELDS}
                row["counts"] = [int(v) for v in self.arrays["counts"][i]]
                row["special_feature"] = [int(v) for v in self.arrays["special_feature"][i]]
                row["label_index"] = int(self.labels[i])
                fh.write(json.dumps(row, separators=(",", ":")) + "\n")

    @classmethod
    def from_jsonl(cls, path):
        path = Path(path)
        with path.open("r", encoding="utf-8") as fh:
            header = json.loads(fh.readline())
            if header.get("format") != "liar-encoded-examples" or header.get("version") != 1:
                raise ValueError(f"{path}: not a version-1 encoded-example cache")
            rows = [json.loads(line) for line in fh if line.strip()]
        if not rows:
            raise ValueError(f"{path}: cache holds no examples")
        arrays = {name: np.array([r[name] for r in rows], dtype=np.int64)
                  for name in _SEQUENCE_FIELDS}
        arrays["counts"] = np.array([r["counts"] for r in rows], dtype=np.float64)
        arrays["special_feature"] = np.array([r["special_feature"] for r in rows],
                                             dtype=np.float64)
        labels = np.array([r["label_index"] for r in rows], dtype=np.int64)
        return cls(arrays, labels)

"""Shared fixtures: synthetic LIAR-format data, prepared caches, small models."""

import os
from pathlib import Path

import numpy as np
import pytest

from liarnet.cli import main as cli_main
from liarnet.selfcheck import downscaled_hyper

# The well-known credit-history row exercised by the encoding tests: counts in
# file order are (70, 71, 160, 163, 9), context "a radio ad".
OBAMA_ROW = ("2635.json\ttrue\t"
             "McCain opposed a requirement that the government buy American-made "
             "motorcycles. And he said all buy-American provisions were quote "
             "'disgraceful.'\t"
             "federal-budget\tbarack-obama\tPresident\tIllinois\tdemocrat\t"
             "70\t71\t160\t163\t9\ta radio ad")

_LABELS = ("pants-fire", "false", "barely-true", "half-true", "mostly-true", "true")

_TOPICS = ("economy", "health-care", "elections", "taxes", "education", "immigration",
           "energy", "crime", "jobs", "budget", "environment", "guns")
_VERBS = ("says", "claims", "reports", "denies", "argues", "states")
_NOUNS = ("spending", "growth", "coverage", "turnout", "wages", "deficit",
          "enrollment", "rates", "funding", "benefits")
_STATES = ("texas", "ohio", "georgia", "florida", "virginia", "wisconsin")
_PARTIES = ("democrat", "republican", "none", "independent")
_JOBS = ("senator", "governor", "state representative", "mayor", "analyst", "")
_CONTEXTS = ("a press release", "an interview", "a campaign ad", "a debate",
             "a speech", "a tweet")


def liar_line(rng, index, label):
    """One synthetic 14-column TSV line with a unique speaker and statement."""
    words = [f"token{index:03d}"]
    words += list(rng.choice(_NOUNS, size=rng.integers(4, 9)))
    words.insert(1, rng.choice(_VERBS))
    statement = f"Speaker {index} " + " ".join(words) + "."
    subjects = ",".join(rng.choice(_TOPICS, size=rng.integers(1, 4), replace=False))
    counts = rng.integers(0, 40, size=5)
    cols = [
        f"{index}.json", label, statement, subjects,
        f"speaker-{index}", rng.choice(_JOBS), rng.choice(_STATES),
        rng.choice(_PARTIES),
        *[str(int(c)) for c in counts],
        rng.choice(_CONTEXTS),
    ]
    return "\t".join(cols)


def write_liar_split(path, n, seed, include_obama=False, constant_label=None):
    rng = np.random.default_rng(seed)
    lines = []
    if include_obama:
        lines.append(OBAMA_ROW)
    for i in range(len(lines), n):
        label = constant_label or _LABELS[i % len(_LABELS)]
        lines.append(liar_line(rng, seed * 10000 + i, label))
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def make_liar_dir(root, n_train=64, n_valid=12, n_test=12, seed=0,
                  constant_test_label=None):
    root = Path(root)
    root.mkdir(parents=True, exist_ok=True)
    write_liar_split(root / "train.tsv", n_train, seed, include_obama=True)
    write_liar_split(root / "valid.tsv", n_valid, seed + 1)
    write_liar_split(root / "test.tsv", n_test, seed + 2,
                     constant_label=constant_test_label)
    return root


@pytest.fixture(scope="session")
def tiny_liar_dir(tmp_path_factory):
    """64/12/12 synthetic LIAR splits; train includes the known credit row."""
    return make_liar_dir(tmp_path_factory.mktemp("liar"), seed=0)


@pytest.fixture(scope="session")
def small_cache(tmp_path_factory, tiny_liar_dir):
    """A prepared cache with a small embedding width, for fast CLI runs."""
    out = tmp_path_factory.mktemp("cache-small")
    config = tmp_path_factory.mktemp("cfg") / "prepare.cfg"
    config.write_text("embed_dim = 8\n", encoding="utf-8")
    code = cli_main(["prepare", "--data-dir", str(tiny_liar_dir),
                     "--out", str(out), "--config", str(config)])
    assert code == 0
    return out


@pytest.fixture(scope="session")
def overfit_cache(tmp_path_factory, tiny_liar_dir):
    """Default-width cache for capacity checks; the valid split is a copy of
    the 64-example train split so best-validation selection tracks
    memorization."""
    data_dir = tmp_path_factory.mktemp("liar-overfit")
    train_bytes = (tiny_liar_dir / "train.tsv").read_bytes()
    (data_dir / "train.tsv").write_bytes(train_bytes)
    (data_dir / "valid.tsv").write_bytes(train_bytes)
    (data_dir / "test.tsv").write_bytes((tiny_liar_dir / "test.tsv").read_bytes())
    out = tmp_path_factory.mktemp("cache-overfit")
    code = cli_main(["prepare", "--data-dir", str(data_dir), "--out", str(out)])
    assert code == 0
    return out


@pytest.fixture
def small_hyper():
    return downscaled_hyper()


@pytest.fixture(scope="session")
def real_liar_dir():
    """The distributed LIAR TSVs, when available; otherwise skip."""
    root = os.environ.get("LIAR_DATA_DIR")
    if not root:
        pytest.skip("LIAR_DATA_DIR not set; distributed dataset not available")
    root = Path(root)
    for split in ("train", "valid", "test"):
        if not (root / f"{split}.tsv").exists():
            pytest.skip(f"{root / f'{split}.tsv'} missing")
    return root

"""
Monte Carlo synthesis of labeled data sets from fingerprint rules.

Every pattern draws a rule according to an :obj:`EmpiricalDistribution`, samples
one concrete response the rule accepts (uniformly among the alternatives and
ranges it allows) and encodes it. Pattern ``n`` uses its own generator seeded
with ``(seed, n)``, so its value doesn't depend on how many patterns come before.
"""
import csv
import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterator, List, Optional, Sequence, Set, Tuple, Union

import numpy as np

from stacksense.datagen.distribution import (
    DistributionEntry,
    EmpiricalDistribution,
    load_distribution,
    parse_distribution,
)
from stacksense.diagnostics import Messages
from stacksense.encoder import EncodingSchema, encode
from stacksense.exceptions import DistributionError, EmptyInput
from stacksense.fpdb import FingerprintRule, ProbeResponse
from stacksense.labels import LabelMap
from stacksense.nn import Dataset


logger = logging.getLogger(__name__)

DATASET_MAGIC = "# stacksense-dataset"
DATASET_FORMAT = 1

Seed = Union[int, Sequence[int], np.random.Generator]


@dataclass(frozen=True)
class GenerationConfig:
    """
    Attributes:
        size: patterns of the relevance and family data set
        version_size: patterns of every version net's data set, ``size`` if 0
        rpc_size: patterns of the endpoint net's data set
        train_fraction: share of every data set used for fitting, the rest is
            held out
        seed: base seed, every data set derives its own from it
    """

    size: int = 5000
    version_size: int = 0
    rpc_size: int = 2000
    train_fraction: float = 0.8
    seed: int = 0

    def validate(self) -> None:
        if self.size < 1:
            raise ValueError(f"size must be positive, got {self.size}")
        if self.version_size < 0:
            raise ValueError(f"version_size can't be negative, got {self.version_size}")
        if self.rpc_size < 1:
            raise ValueError(f"rpc_size must be positive, got {self.rpc_size}")
        if not 0.0 < self.train_fraction <= 1.0:
            raise ValueError(f"train_fraction must be in (0, 1], got {self.train_fraction}")

    def serialize(self) -> dict:
        return {
            "size": self.size,
            "version_size": self.version_size,
            "rpc_size": self.rpc_size,
            "train_fraction": self.train_fraction,
            "seed": self.seed,
        }


def _rng(seed: Seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_response(rule: FingerprintRule, seed: Seed) -> ProbeResponse:
    """
    One concrete response ``rule`` accepts. Constants are copied, alternatives and
    ranges are drawn uniformly and fields the rule doesn't constrain are left out.
    """
    rng = _rng(seed)
    resp = ProbeResponse()
    for test, fields in rule.tests.items():
        if not rule.responds(test):
            resp.tests[test] = {"Resp": "N"}
            continue
        values: Dict[str, str] = {}
        for name, spec in fields.items():
            value = spec.sample(rng)
            if value is not None:
                values[name] = value
        resp.tests[test] = values
    return resp


@dataclass(eq=False)
class LabeledDataset:
    """
    Encoded patterns with the labels of every stage of the hierarchy.

    Attributes:
        inputs: one encoded response per row
        rules: name of the rule every pattern was drawn from
        relevant: ``True`` for patterns of a relevant family
        family: family index, ``-1`` for irrelevant patterns
        version: version group index within the family, ``-1`` if none
        schema_version: version of the encoding schema of ``inputs``
        seed: seed the patterns were generated with
    """

    inputs: np.ndarray
    rules: List[str]
    relevant: np.ndarray
    family: np.ndarray
    version: np.ndarray
    schema_version: str
    seed: int = 0

    def __len__(self) -> int:
        return int(self.inputs.shape[0])

    def subset(self, indices: Sequence[int]) -> "LabeledDataset":
        idx = np.asarray(indices, dtype=int)
        return LabeledDataset(
            self.inputs[idx],
            [self.rules[i] for i in idx],
            self.relevant[idx],
            self.family[idx],
            self.version[idx],
            self.schema_version,
            self.seed,
        )

    def relevance_data(self) -> Dataset:
        """
        Every pattern, target ``+1`` when relevant and ``-1`` otherwise.
        """
        targets = np.where(self.relevant, 1.0, -1.0)[:, None]
        return Dataset(self.inputs, targets)

    def family_indices(self, family: Optional[int] = None) -> np.ndarray:
        """
        Patterns of a relevant family, or of ``family`` only.
        """
        if family is None:
            return np.flatnonzero(self.family >= 0)
        return np.flatnonzero(self.family == family)

    def family_data(self, n_families: int) -> Dataset:
        idx = self.family_indices()
        if not idx.size:
            raise EmptyInput("no pattern of a relevant family")
        return Dataset(self.inputs[idx], one_hot(self.family[idx], n_families))

    def version_data(self, family: int, n_groups: int) -> Dataset:
        idx = np.flatnonzero((self.family == family) & (self.version >= 0))
        if not idx.size:
            raise EmptyInput(f"no pattern with a version group in family {family}")
        return Dataset(self.inputs[idx], one_hot(self.version[idx], n_groups))


def one_hot(labels: np.ndarray, n: int) -> np.ndarray:
    """
    ``+1`` at every label's column, ``-1`` everywhere else.
    """
    out = -np.ones((len(labels), n))
    out[np.arange(len(labels)), np.asarray(labels, dtype=int)] = 1.0
    return out


def draw_rules(
    weights: np.ndarray, size: int, seed: int = 0
) -> Iterator[Tuple[int, np.random.Generator]]:
    """
    Index of the rule behind each of ``size`` patterns, drawn with probabilities
    ``weights``, together with the generator the pattern is sampled with. Pattern
    ``n`` only depends on ``(seed, n)``.
    """
    for n in range(size):
        rng = np.random.default_rng([seed, n])
        yield int(rng.choice(len(weights), p=weights)), rng


def generate_dataset(
    rules: List[FingerprintRule],
    dist: EmpiricalDistribution,
    schema: EncodingSchema,
    labels: LabelMap,
    size: int,
    seed: int = 0,
    messages: Optional[Messages] = None,
) -> LabeledDataset:
    """
    Draws ``size`` patterns from ``rules`` weighted by ``dist``.

    Encoding problems are reported once each in ``messages``.

    Raises:
        DistributionError: no rule gets any weight
    """
    if size < 1:
        raise ValueError(f"size must be positive, got {size}")
    if not rules:
        raise DistributionError("no rules to draw from")
    weights = dist.rule_weights(rules, messages)

    inputs = np.empty((size, schema.total_dim))
    names: List[str] = []
    relevant = np.zeros(size, dtype=bool)
    family = np.full(size, -1, dtype=int)
    version = np.full(size, -1, dtype=int)
    seen: Set[Tuple[str, str]] = set()
    for n, (index, rng) in enumerate(draw_rules(weights, size, seed)):
        rule = rules[index]
        local = Messages()
        inputs[n] = encode(sample_response(rule, rng), schema, local)
        if messages is not None:
            for m in local:
                if (m.message_type, m.message) not in seen:
                    seen.add((m.message_type, m.message))
                    messages.append(m)
        names.append(rule.name)
        f = labels.family_of(rule)
        if f is not None:
            relevant[n] = True
            family[n] = f
            v = labels.version_of(rule)
            version[n] = -1 if v is None else v

    logger.info(
        "generated %d patterns from %d rules (seed %d), %d relevant",
        size,
        len(rules),
        seed,
        int(relevant.sum()),
    )
    return LabeledDataset(inputs, names, relevant, family, version, schema.version, seed)


def split_indices(size: int, fraction: float = 0.8) -> Tuple[np.ndarray, np.ndarray]:
    """
    First ``round(fraction * size)`` indices for training, the rest held out.
    """
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    cut = int(round(fraction * size))
    return np.arange(cut), np.arange(cut, size)


def _number(v: float) -> str:
    return repr(float(v))


def dumps_dataset(ds: LabeledDataset) -> str:
    """
    The data set as delimited text: a header line naming the format, schema version
    and seed, a row of column names, then one row per pattern.
    """
    buf = io.StringIO()
    buf.write(
        f"{DATASET_MAGIC} {DATASET_FORMAT} schema={ds.schema_version} "
        f"seed={ds.seed} size={len(ds)}\n"
    )
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(
        ["rule", "relevant", "family", "version"]
        + [f"x{i}" for i in range(ds.inputs.shape[1])]
    )
    for n in range(len(ds)):
        writer.writerow(
            [ds.rules[n], int(ds.relevant[n]), int(ds.family[n]), int(ds.version[n])]
            + [_number(v) for v in ds.inputs[n]]
        )
    return buf.getvalue()


def loads_dataset(text: str) -> LabeledDataset:
    """
    Raises:
        ValueError: the text is not a data set written by :func:`dumps_dataset`
    """
    header, _, body = text.partition("\n")
    if not header.startswith(DATASET_MAGIC):
        raise ValueError("not a stacksense data set")
    fields = dict(item.split("=", 1) for item in header.split()[3:] if "=" in item)
    if header.split()[2] != str(DATASET_FORMAT):
        raise ValueError(f"unsupported data set format {header.split()[2]}")
    if "schema" not in fields:
        raise ValueError("data set header has no schema version")
    rows = list(csv.reader(io.StringIO(body)))
    if not rows:
        raise ValueError("data set has no column names")
    dim = len(rows[0]) - 4
    records = rows[1:]
    if not records:
        raise EmptyInput("data set has no patterns")
    inputs = np.empty((len(records), dim))
    names: List[str] = []
    relevant = np.zeros(len(records), dtype=bool)
    family = np.empty(len(records), dtype=int)
    version = np.empty(len(records), dtype=int)
    for n, row in enumerate(records):
        if len(row) != dim + 4:
            raise ValueError(f"row {n + 1} has {len(row)} columns, expected {dim + 4}")
        names.append(row[0])
        relevant[n] = row[1] == "1"
        family[n] = int(row[2])
        version[n] = int(row[3])
        inputs[n] = [float(v) for v in row[4:]]
    return LabeledDataset(
        inputs, names, relevant, family, version, fields["schema"], int(fields.get("seed", 0))
    )


def write_dataset(ds: LabeledDataset, filepath: Union[str, Path]) -> None:
    Path(filepath).write_text(dumps_dataset(ds), encoding="utf-8")


def read_dataset(filepath: Union[str, Path]) -> LabeledDataset:
    return loads_dataset(Path(filepath).read_text(encoding="utf-8"))


__all__ = (
    "DistributionEntry",
    "EmpiricalDistribution",
    "GenerationConfig",
    "LabeledDataset",
    "draw_rules",
    "dumps_dataset",
    "generate_dataset",
    "load_distribution",
    "loads_dataset",
    "one_hot",
    "parse_distribution",
    "read_dataset",
    "sample_response",
    "split_indices",
    "write_dataset",
)

"""
Synthetic endpoint maps of Windows hosts.

A profile file lists, for every Windows version, the endpoints every install
registers, those added by every edition and those added by every service pack.
Service packs are cumulative: SP2 also registers what SP1 did. A sampled map loses
each endpoint with probability ``drop_rate`` and, with probability
``unknown_rate``, gets a service the inventory doesn't know about.
"""
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Tuple, Union

import numpy as np

from stacksense import data
from stacksense.encoder.endpoints import (
    PORT_PROTOCOLS,
    UUID_RE,
    EndpointEntry,
    EndpointMap,
    RpcSchema,
    encode_endpoints,
)
from stacksense.exceptions import EndpointMapError
from stacksense.nn import Dataset


logger = logging.getLogger(__name__)

DEFAULT_RPC_PROFILES = "rpc-profiles.json"

EndpointRef = Tuple[str, str, str]
Layer = Tuple[str, List[EndpointRef]]


def parse_ref(ref: str) -> EndpointRef:
    """
    ``"<uuid> <protocol>:<endpoint>"`` as ``(uuid, protocol, endpoint)``.
    """
    uuid, _, rest = ref.partition(" ")
    protocol, sep, endpoint = rest.partition(":")
    if not UUID_RE.match(uuid) or not sep:
        raise EndpointMapError(f"invalid endpoint reference '{ref}'")
    return uuid.upper(), protocol, endpoint


@dataclass
class VersionProfile:
    label: str
    base: List[EndpointRef]
    editions: List[Layer]
    service_packs: List[Layer]

    def __post_init__(self) -> None:
        if not self.editions or not self.service_packs:
            raise ValueError(f"{self.label} needs at least one edition and one service pack")

    def endpoints(self, edition: int, service_pack: int) -> List[EndpointRef]:
        """
        Endpoints of an install, in a stable order without duplicates.
        """
        refs = list(self.base) + list(self.editions[edition][1])
        for _, extra in self.service_packs[: service_pack + 1]:
            refs.extend(extra)
        return list(dict.fromkeys(refs))


#: ``(version, edition, service pack)`` indices
Combo = Tuple[int, int, int]


@dataclass
class RpcProfiles:
    """
    Attributes:
        versions: one profile per Windows version, in output order
        drop_rate: probability of leaving an endpoint out of a sampled map
        unknown_rate: probability of adding an unknown service to a sampled map
    """

    versions: List[VersionProfile]
    drop_rate: float = 0.05
    unknown_rate: float = 0.05

    def __post_init__(self) -> None:
        if not self.versions:
            raise ValueError("no versions in the rpc profiles")
        for rate in (self.drop_rate, self.unknown_rate):
            if not 0.0 <= rate < 1.0:
                raise ValueError(f"rates must be in [0, 1), got {rate}")

    def combos(self) -> Iterator[Combo]:
        for v, profile in enumerate(self.versions):
            for e in range(len(profile.editions)):
                for s in range(len(profile.service_packs)):
                    yield v, e, s

    def output_labels(self) -> List[str]:
        """
        Label of every output unit: the versions, then for every version its
        editions and its service packs.
        """
        out = [p.label for p in self.versions]
        for p in self.versions:
            out.extend(name for name, _ in p.editions)
            out.extend(f"sp{name}" for name, _ in p.service_packs)
        return out

    def output_groups(self) -> Dict[str, Any]:
        """
        Index ranges of the output groups, ``[start, stop)``.
        """
        pos = len(self.versions)
        per_version = []
        for p in self.versions:
            editions = [pos, pos + len(p.editions)]
            pos += len(p.editions)
            service_packs = [pos, pos + len(p.service_packs)]
            pos += len(p.service_packs)
            per_version.append(
                {"label": p.label, "editions": editions, "service_packs": service_packs}
            )
        return {"versions": [0, len(self.versions)], "per_version": per_version}

    def target(self, combo: Combo) -> np.ndarray:
        """
        ``+1`` at the combo's version, edition and service pack units, ``-1``
        everywhere else.
        """
        groups = self.output_groups()
        v, e, s = combo
        out = -np.ones(len(self.output_labels()))
        out[v] = 1.0
        out[groups["per_version"][v]["editions"][0] + e] = 1.0
        out[groups["per_version"][v]["service_packs"][0] + s] = 1.0
        return out

    def describe(self, combo: Combo) -> str:
        v, e, s = combo
        p = self.versions[v]
        return f"{p.label} {p.editions[e][0]} sp{p.service_packs[s][0]}"

    def check(self, schema: RpcSchema) -> None:
        """
        Raises:
            EndpointMapError: a profile uses an endpoint the schema doesn't know
        """
        index = schema.index()
        for p in self.versions:
            layers = [p.base] + [refs for _, refs in p.editions + p.service_packs]
            for refs in layers:
                for uuid, protocol, endpoint in refs:
                    key = (uuid, protocol, "" if protocol in PORT_PROTOCOLS else endpoint)
                    if key not in index:
                        raise EndpointMapError(
                            f"{p.label}: {uuid} {protocol}:{endpoint} is not in the inventory"
                        )

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "RpcProfiles":
        versions = []
        for v in raw["versions"]:
            versions.append(
                VersionProfile(
                    label=v["label"],
                    base=[parse_ref(r) for r in v["base"]],
                    editions=[(str(n), [parse_ref(r) for r in refs]) for n, refs in v["editions"]],
                    service_packs=[
                        (str(n), [parse_ref(r) for r in refs]) for n, refs in v["service_packs"]
                    ],
                )
            )
        return cls(
            versions,
            drop_rate=float(raw.get("drop_rate", 0.05)),
            unknown_rate=float(raw.get("unknown_rate", 0.05)),
        )


def load_rpc_profiles(filepath: Optional[Union[str, Path]] = None) -> RpcProfiles:
    if filepath is None:
        raw = data.load_json(DEFAULT_RPC_PROFILES)
    else:
        with open(filepath, encoding="utf-8") as f:
            raw = json.load(f)
    return RpcProfiles.from_dict(raw)


def _random_uuid(rng: np.random.Generator) -> str:
    digits = "".join(f"{int(b):02X}" for b in rng.integers(0, 256, size=16))
    return "-".join(
        (digits[:8], digits[8:12], digits[12:16], digits[16:20], digits[20:])
    )


def sample_endpoint_map(
    profiles: RpcProfiles, combo: Combo, rng: np.random.Generator, schema: RpcSchema
) -> EndpointMap:
    """
    One noisy endpoint map of the install ``combo``. Port based endpoints get a
    random dynamic port.
    """
    annotations = dict(zip(schema.uuids, schema.annotations))
    v, e, s = combo
    entries = []
    for uuid, protocol, endpoint in profiles.versions[v].endpoints(e, s):
        if rng.random() < profiles.drop_rate:
            continue
        if protocol in PORT_PROTOCOLS and not endpoint:
            endpoint = str(int(rng.integers(1025, 5000)))
        entries.append(EndpointEntry(uuid, annotations.get(uuid, ""), protocol, endpoint))
    if rng.random() < profiles.unknown_rate:
        entries.append(EndpointEntry(_random_uuid(rng), "", "ncalrpc", "LRPC"))
    return EndpointMap(entries)


@dataclass(eq=False)
class RpcDataset:
    """
    Attributes:
        data: encoded maps and their targets
        combos: install every pattern was drawn from
        schema_version: version of the endpoint schema of the inputs
    """

    data: Dataset
    combos: List[Combo]
    schema_version: str

    def __len__(self) -> int:
        return len(self.combos)

    def subset(self, indices: np.ndarray) -> "RpcDataset":
        return RpcDataset(
            self.data.subset(indices), [self.combos[i] for i in indices], self.schema_version
        )


def generate_rpc_dataset(
    profiles: RpcProfiles, schema: RpcSchema, size: int, seed: int = 0
) -> RpcDataset:
    """
    ``size`` endpoint maps, each of an install drawn uniformly among every version,
    edition and service pack combination.
    """
    if size < 1:
        raise ValueError(f"size must be positive, got {size}")
    profiles.check(schema)
    combos = list(profiles.combos())
    inputs = np.empty((size, schema.total_dim))
    targets = np.empty((size, len(profiles.output_labels())))
    drawn: List[Combo] = []
    for n in range(size):
        rng = np.random.default_rng([seed, n])
        combo = combos[int(rng.integers(len(combos)))]
        inputs[n] = encode_endpoints(sample_endpoint_map(profiles, combo, rng, schema), schema)
        targets[n] = profiles.target(combo)
        drawn.append(combo)
    logger.info("generated %d endpoint maps over %d installs (seed %d)", size, len(combos), seed)
    return RpcDataset(Dataset(inputs, targets), drawn, schema.version)

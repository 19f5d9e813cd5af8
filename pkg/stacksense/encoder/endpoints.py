"""
DCE-RPC endpoint mapper listings and their encoding.

A listing looks like::

    uuid="5A7B91F8-FF00-11D0-A9B2-00C04FB6E6FC"
    annotation="Messenger Service"
     protocol="ncalrpc"      endpoint="ntsvcs"       id="msgsvc.1"
     protocol="ncacn_np"     endpoint="\\PIPE\\ntsvcs" id="msgsvc.2"
     protocol="ncadg_ip_udp"                         id="msgsvc.4"
"""
import hashlib
import json
import logging
import re
from dataclasses import dataclass, field
from typing import Any, Dict, List, NamedTuple, Optional, Set, Tuple

import numpy as np

from stacksense import data
from stacksense.exceptions import EndpointMapError


logger = logging.getLogger(__name__)

DEFAULT_RPC_INVENTORY = "rpc-inventory.json"

UUID_RE = re.compile(
    r"^[0-9A-Fa-f]{8}-[0-9A-Fa-f]{4}-[0-9A-Fa-f]{4}-[0-9A-Fa-f]{4}-[0-9A-Fa-f]{12}$"
)
_PAIR = re.compile(r'(\w+)="([^"]*)"')

#: the endpoint of these protocols is a port number, usually dynamic
PORT_PROTOCOLS = ("ncacn_ip_tcp", "ncadg_ip_udp", "ncacn_http")

EndpointKey = Tuple[str, str, str]


class EndpointEntry(NamedTuple):
    uuid: str
    annotation: str
    protocol: str
    endpoint: str

    @property
    def key(self) -> EndpointKey:
        """
        ``(uuid, protocol, endpoint)`` with the uuid upper cased and port numbers
        dropped.
        """
        endpoint = "" if self.protocol in PORT_PROTOCOLS else self.endpoint
        return (self.uuid.upper(), self.protocol, endpoint)


@dataclass
class EndpointMap:
    entries: List[EndpointEntry] = field(default_factory=list)

    def __post_init__(self) -> None:
        for e in self.entries:
            if not UUID_RE.match(e.uuid):
                raise EndpointMapError(f"invalid uuid '{e.uuid}'")

    def uuids(self) -> Set[str]:
        return {e.uuid.upper() for e in self.entries}

    def keys(self) -> Set[EndpointKey]:
        return {e.key for e in self.entries}

    def to_text(self) -> str:
        """
        The listing format read by :func:`parse_endpoint_listing`.
        """
        lines: List[str] = []
        current: Optional[str] = None
        for e in self.entries:
            if e.uuid != current:
                if current is not None:
                    lines.append("")
                lines.append(f'uuid="{e.uuid}"')
                if e.annotation:
                    lines.append(f'annotation="{e.annotation}"')
                current = e.uuid
            endpoint = f' endpoint="{e.endpoint}"' if e.endpoint else ""
            lines.append(f' protocol="{e.protocol}"{endpoint}')
        return "".join(f"{line}\n" for line in lines)


def parse_endpoint_listing(text: str) -> EndpointMap:
    """
    Reads an endpoint mapper listing. Every ``protocol`` line belongs to the last
    ``uuid`` seen.

    Raises:
        EndpointMapError: invalid uuid or a protocol line before any uuid
    """
    entries: List[EndpointEntry] = []
    uuid: Optional[str] = None
    annotation = ""
    for lineno, line in enumerate(text.splitlines(), 1):
        pairs = dict(_PAIR.findall(line))
        if not pairs:
            continue
        if "uuid" in pairs:
            uuid = pairs["uuid"]
            if not UUID_RE.match(uuid):
                raise EndpointMapError(f"line {lineno}: invalid uuid '{uuid}'")
            annotation = ""
        if "annotation" in pairs:
            annotation = pairs["annotation"]
        if "protocol" in pairs:
            if uuid is None:
                raise EndpointMapError(f"line {lineno}: protocol before any uuid")
            entries.append(
                EndpointEntry(uuid, annotation, pairs["protocol"], pairs.get("endpoint", ""))
            )
    return EndpointMap(entries)


@dataclass(frozen=True)
class RpcSchema:
    """
    Input layout of the endpoint net: for every known uuid one unit followed by one
    unit per known endpoint of that uuid, then a unit counting unknown uuids.

    Attributes:
        uuids: known uuids, upper case, in inventory order
        annotations: name of every known uuid
        endpoints: known endpoints per uuid as ``(protocol, endpoint)``
        version: ``<inventory version>-<digest of the layout>``
    """

    uuids: Tuple[str, ...]
    annotations: Tuple[str, ...]
    endpoints: Tuple[Tuple[Tuple[str, str], ...], ...]
    version: str

    @property
    def total_dim(self) -> int:
        return len(self.uuids) + sum(len(e) for e in self.endpoints) + 1

    def index(self) -> Dict[Any, int]:
        """
        Unit of every uuid and of every endpoint key.
        """
        out: Dict[Any, int] = {}
        pos = 0
        for uuid, endpoints in zip(self.uuids, self.endpoints):
            out[uuid] = pos
            pos += 1
            for protocol, endpoint in endpoints:
                out[(uuid, protocol, endpoint)] = pos
                pos += 1
        return out

    def feature_names(self) -> List[str]:
        names = []
        for uuid, annotation, endpoints in zip(self.uuids, self.annotations, self.endpoints):
            names.append(f"{uuid} {annotation}".strip())
            names.extend(f"{uuid} {p}:{e}" for p, e in endpoints)
        names.append("unknown uuids")
        return names


def build_rpc_schema(inventory: Optional[Dict[str, Any]] = None) -> RpcSchema:
    inventory = inventory if inventory is not None else data.load_json(DEFAULT_RPC_INVENTORY)
    uuids = []
    annotations = []
    endpoints = []
    for item in inventory["uuids"]:
        uuid = item["uuid"].upper()
        if not UUID_RE.match(uuid):
            raise EndpointMapError(f"invalid uuid '{uuid}' in inventory")
        uuids.append(uuid)
        annotations.append(item.get("annotation", ""))
        pairs = []
        for ref in item["endpoints"]:
            protocol, _, endpoint = ref.partition(":")
            pairs.append((protocol, "" if protocol in PORT_PROTOCOLS else endpoint))
        endpoints.append(tuple(pairs))
    layout = json.dumps([uuids, endpoints], sort_keys=True)
    digest = hashlib.sha256(layout.encode()).hexdigest()[:8]
    schema = RpcSchema(
        tuple(uuids), tuple(annotations), tuple(endpoints), f"{inventory['version']}-{digest}"
    )
    logger.info("rpc schema %s: %d units", schema.version, schema.total_dim)
    return schema


def encode_endpoints(endpoint_map: EndpointMap, schema: RpcSchema) -> np.ndarray:
    """
    ``+1`` for every uuid and endpoint present, ``-1`` otherwise; the last unit is
    the number of distinct unknown uuids. Duplicate entries don't matter.
    """
    index = schema.index()
    out = -np.ones(schema.total_dim)
    unknown = set()
    for key in endpoint_map.keys():
        uuid = key[0]
        if uuid not in index:
            unknown.add(uuid)
            continue
        out[index[uuid]] = 1.0
        if key in index:
            out[index[key]] = 1.0
    out[-1] = float(len(unknown))
    if unknown:
        logger.debug("%d unknown uuids", len(unknown))
    return out

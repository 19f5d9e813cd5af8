import pathlib

import numpy as np

import pytest

from stacksense.encoder.endpoints import (
    EndpointEntry,
    EndpointMap,
    build_rpc_schema,
    encode_endpoints,
    parse_endpoint_listing,
)
from stacksense.exceptions import EndpointMapError


BASE = pathlib.Path(__file__).parent
schema = build_rpc_schema()

MESSENGER = "5A7B91F8-FF00-11D0-A9B2-00C04FB6E6FC"
ATSVC = "1FF70682-0A51-30E8-076D-740BE8CEE98B"


def w2k() -> EndpointMap:
    return parse_endpoint_listing(BASE.joinpath("../data/w2k-server-sp1.txt").read_text())


class Test:
    def test_parse(self) -> None:
        endpoint_map = w2k()
        assert len(endpoint_map.entries) == 14
        assert len(endpoint_map.uuids()) == 6
        first = endpoint_map.entries[0]
        assert first == EndpointEntry(MESSENGER, "Messenger Service", "ncalrpc", "ntsvcs")
        assert endpoint_map.entries[3].endpoint == ""
        assert endpoint_map.entries[4].annotation == ""
        assert endpoint_map.entries[1].endpoint == "\\PIPE\\ntsvcs"

    def test_key_drops_ports(self) -> None:
        entry = EndpointEntry(ATSVC.lower(), "", "ncacn_ip_tcp", "1025")
        assert entry.key == (ATSVC, "ncacn_ip_tcp", "")
        entry = EndpointEntry(ATSVC, "", "ncalrpc", "LRPC")
        assert entry.key == (ATSVC, "ncalrpc", "LRPC")

    def test_schema(self) -> None:
        assert len(schema.uuids) == 31
        assert schema.total_dim == 94
        assert len(schema.feature_names()) == schema.total_dim
        assert schema.feature_names()[0] == f"{MESSENGER} Messenger Service"
        assert schema.feature_names()[-1] == "unknown uuids"
        assert schema.version.startswith("1-")

    def test_encode(self) -> None:
        v = encode_endpoints(w2k(), schema)
        index = schema.index()
        assert v.shape == (94,)
        assert v[index[MESSENGER]] == 1
        assert v[index[(MESSENGER, "ncadg_ip_udp", "")]] == 1
        assert v[index[(ATSVC, "ncacn_ip_tcp", "")]] == 1
        assert v[index[(ATSVC, "ncacn_np", "\\PIPE\\atsvc")]] == -1
        assert v[-1] == 0
        # 6 uuids and 14 known endpoints
        assert np.sum(v[:-1] == 1) == 6 + 14

    def test_duplicates_ignored(self) -> None:
        endpoint_map = w2k()
        doubled = EndpointMap(endpoint_map.entries + endpoint_map.entries)
        assert np.array_equal(
            encode_endpoints(doubled, schema), encode_endpoints(endpoint_map, schema)
        )

    def test_unknown_uuids(self) -> None:
        text = """uuid="00000000-0000-0000-0000-000000000001"
 protocol="ncalrpc" endpoint="a"
 protocol="ncalrpc" endpoint="b"
uuid="00000000-0000-0000-0000-00000000000a"
 protocol="ncalrpc" endpoint="a"
uuid="00000000-0000-0000-0000-00000000000A"
 protocol="ncalrpc" endpoint="a"
"""
        v = encode_endpoints(parse_endpoint_listing(text), schema)
        assert v[-1] == 2
        assert np.all(v[:-1] == -1)

    def test_empty(self) -> None:
        v = encode_endpoints(EndpointMap(), schema)
        assert np.all(v[:-1] == -1)
        assert v[-1] == 0

    def test_to_text(self) -> None:
        endpoint_map = w2k()
        again = parse_endpoint_listing(endpoint_map.to_text())
        assert again.entries == endpoint_map.entries

    @pytest.mark.parametrize(  # type: ignore
        "text",
        ['uuid="not-a-uuid"\n', ' protocol="ncalrpc" endpoint="x"\n'],
    )
    def test_invalid(self, text: str) -> None:
        with pytest.raises(EndpointMapError):
            parse_endpoint_listing(text)

    def test_invalid_entry(self) -> None:
        with pytest.raises(EndpointMapError):
            EndpointMap([EndpointEntry("xyz", "", "ncalrpc", "a")])

import pathlib

import numpy as np

import pytest

from stacksense.datagen import (
    EmpiricalDistribution,
    GenerationConfig,
    dumps_dataset,
    generate_dataset,
    loads_dataset,
    one_hot,
    read_dataset,
    sample_response,
    split_indices,
    write_dataset,
)
from stacksense.diagnostics import Messages
from stacksense.encoder import build_nmap_schema
from stacksense.exceptions import EmptyInput
from stacksense.fpdb import parse_db
from stacksense.labels import load_labels


BASE = pathlib.Path(__file__).parent
db = parse_db(BASE.joinpath("../data/fixture-db.txt").read_text())
schema = build_nmap_schema()
labels = load_labels()


def generate(size: int, seed: int = 0):  # type: ignore
    return generate_dataset(
        db.rules, EmpiricalDistribution.uniform(), schema, labels, size, seed
    )


class Test:
    def test_sample_response(self) -> None:
        rule = db.rules[15]
        resp = sample_response(rule, 0)
        assert resp.tests["T2"] == {"Resp": "N"}
        assert set(resp.tests) == set(rule.tests)
        for test, fields in resp.tests.items():
            for name, value in fields.items():
                assert rule.spec(test, name).matches(value)

    def test_sample_response_seeded(self) -> None:
        rule = db.rules[0]
        assert sample_response(rule, [3, 1]) == sample_response(rule, [3, 1])
        samples = {sample_response(rule, [3, n]).tests["TSeq"]["SI"] for n in range(20)}
        assert len(samples) > 1

    def test_generate(self) -> None:
        ds = generate(200)
        assert ds.inputs.shape == (200, schema.total_dim)
        assert ds.schema_version == schema.version
        for n in range(len(ds)):
            rule = next(r for r in db.rules if r.name == ds.rules[n])
            assert ds.relevant[n] == labels.is_relevant(rule)
            expected_family = labels.family_of(rule)
            assert ds.family[n] == (-1 if expected_family is None else expected_family)
            expected_version = labels.version_of(rule)
            assert ds.version[n] == (-1 if expected_version is None else expected_version)
        assert 0 < ds.relevant.sum() < 200

    def test_patterns_are_independent_of_size(self) -> None:
        small = generate(10, seed=4)
        large = generate(30, seed=4)
        assert np.array_equal(small.inputs, large.inputs[:10])
        assert small.rules == large.rules[:10]
        assert not np.array_equal(generate(10, seed=5).inputs, small.inputs)

    def test_encoding_messages_reported_once(self) -> None:
        rules = parse_db("Fingerprint X\nClass a | b | c | d\nT1(ACK=Q%W=0)\n").rules
        messages = Messages()
        generate_dataset(
            rules, EmpiricalDistribution.uniform(), schema, labels, 5, messages=messages
        )
        assert [m.message_type for m in messages] == ["W203"]

    def test_stage_data(self) -> None:
        ds = generate(300)
        relevance = ds.relevance_data()
        assert relevance.targets[:, 0].tolist() == [1.0 if r else -1.0 for r in ds.relevant]
        family = ds.family_data(len(labels.relevant))
        assert len(family) == ds.relevant.sum()
        assert np.all((family.targets == 1).sum(axis=1) == 1)
        linux = ds.version_data(0, len(labels.version_labels("Linux")))
        assert len(linux) == (ds.family == 0).sum()
        with pytest.raises(EmptyInput):
            ds.version_data(3, 1)

    def test_one_hot(self) -> None:
        assert one_hot(np.array([2, 0]), 3).tolist() == [[-1, -1, 1], [1, -1, -1]]

    def test_split(self) -> None:
        train, held_out = split_indices(10, 0.8)
        assert train.tolist() == list(range(8))
        assert held_out.tolist() == [8, 9]
        train, held_out = split_indices(5, 1.0)
        assert len(held_out) == 0
        with pytest.raises(ValueError):
            split_indices(10, 0.0)

    def test_dumps_loads(self, tmp_path: pathlib.Path) -> None:
        ds = generate(20, seed=2).subset([3, 1, 7])
        text = dumps_dataset(ds)
        assert text.startswith(f"# stacksense-dataset 1 schema={schema.version} seed=2 size=3\n")
        again = loads_dataset(text)
        assert np.array_equal(again.inputs, ds.inputs)
        assert again.rules == ds.rules
        assert again.family.tolist() == ds.family.tolist()
        assert again.seed == 2
        filepath = tmp_path / "ds.csv"
        write_dataset(ds, filepath)
        assert np.array_equal(read_dataset(filepath).version, ds.version)

    @pytest.mark.parametrize(  # type: ignore
        "text",
        [
            "rule,relevant\n",
            "# stacksense-dataset 9 schema=1-x\nrule,relevant,family,version\n",
            "# stacksense-dataset 1 seed=0\nrule,relevant,family,version\n",
            "# stacksense-dataset 1 schema=1-x\nrule,relevant,family,version,x0\na,1,0\n",
        ],
    )
    def test_loads_invalid(self, text: str) -> None:
        with pytest.raises(ValueError):
            loads_dataset(text)

    def test_loads_empty(self) -> None:
        with pytest.raises(EmptyInput):
            loads_dataset("# stacksense-dataset 1 schema=1-x\nrule,relevant,family,version\n")

    def test_config(self) -> None:
        GenerationConfig().validate()
        for bad in (
            GenerationConfig(size=0),
            GenerationConfig(version_size=-1),
            GenerationConfig(rpc_size=0),
            GenerationConfig(train_fraction=0.0),
        ):
            with pytest.raises(ValueError):
                bad.validate()
        with pytest.raises(ValueError):
            generate(0)

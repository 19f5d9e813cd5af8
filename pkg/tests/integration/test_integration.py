import json
import logging
import pathlib
from typing import Any, Dict, List, Tuple

import pytest

from stacksense.datagen import EmpiricalDistribution, GenerationConfig, sample_response
from stacksense.datagen.rpc import load_rpc_profiles
from stacksense.encoder import EncodingSchema, build_nmap_schema
from stacksense.encoder.endpoints import build_rpc_schema, parse_endpoint_listing
from stacksense.fpdb import FingerprintRule, parse_db, parse_response
from stacksense.fpdb.scoring import classic_match, classic_score
from stacksense.hierarchy import (
    HierarchyTraining,
    classify_endpoints,
    classify_host,
    evaluate,
    train_hierarchy,
)
from stacksense.hierarchy.model_file import dumps_model, load_model, save_model
from stacksense.labels import load_labels
from stacksense.nn.training import TrainingConfig


logging_format = (
    "%(asctime)s - %(name)30s - %(levelname)8s - %(funcName)20s() - %(message)s"
)
logging.basicConfig(format=logging_format, level=logging.ERROR)

BASE = pathlib.Path(__file__).parent


def get_test_cases(test: str) -> Dict[str, Any]:
    test_cases: List[Tuple[str, pathlib.Path]] = []
    ids: List[str] = []
    for test_case_path in sorted(BASE.joinpath(f"data/{test}").iterdir()):
        ids.append(test_case_path.name)
        test_cases.append((test_case_path.name, test_case_path))
    return {
        "argnames": "test_case,test_case_path",
        "argvalues": test_cases,
        "ids": ids,
    }


def fixture_rules() -> List[FingerprintRule]:
    with open(BASE.joinpath("../data/fixture-db.txt"), "r") as f:
        return parse_db(f.read()).rules


def train(
    rules: List[FingerprintRule], schema: EncodingSchema, generation: GenerationConfig, gens: int
) -> HierarchyTraining:
    return train_hierarchy(
        rules,
        EmpiricalDistribution.uniform(),
        schema,
        load_labels(),
        generation,
        TrainingConfig(rate=0.5, momentum=0.5, max_generations=gens),
        rpc=(load_rpc_profiles(), build_rpc_schema()),
    )


@pytest.fixture(scope="module")  # type: ignore
def schema() -> EncodingSchema:
    return build_nmap_schema()


@pytest.fixture(scope="module")  # type: ignore
def trained(schema: EncodingSchema) -> HierarchyTraining:
    generation = GenerationConfig(size=5000, version_size=2000, rpc_size=2000)
    return train(fixture_rules(), schema, generation, 1000)


class Test:
    def test_held_out(self, trained: HierarchyTraining) -> None:
        result = evaluate(trained.model, trained.dataset, trained.held_out)
        assert result.counts["relevance"] == 1000
        assert result.relevance is not None and result.relevance >= 0.98
        assert result.family is not None and result.family >= 0.95

    @pytest.mark.parametrize(**get_test_cases("classify"))  # type: ignore
    def test_classify(
        self,
        trained: HierarchyTraining,
        schema: EncodingSchema,
        test_case: str,
        test_case_path: pathlib.Path,
    ) -> None:
        with open(test_case_path.joinpath("response"), "r") as f:
            resp = parse_response(f.read())
        with open(test_case_path.joinpath("expected.json"), "r") as f:
            expected = json.load(f)

        report = classify_host(trained.model, resp, schema)
        assert report.relevant == expected["relevant"]
        assert report.family == expected["family"]
        if "decided" in expected:
            assert report.decided == expected["decided"]

        ranked = classic_match(resp, fixture_rules())
        best = ranked[0][1].score
        best_fit = [r.name for r, s in ranked if s.score == best]
        assert expected["classic"] in best_fit
        if expected.get("classic_alone"):
            # a sparse rule beats the dense one the host was drawn from
            assert best_fit == [expected["classic"]]

    def test_classic_self_match(self) -> None:
        for rule in fixture_rules():
            for n in range(50):
                assert classic_score(sample_response(rule, [7, n]), rule).score == 1.0

    @pytest.mark.parametrize(**get_test_cases("endpoints"))  # type: ignore
    def test_endpoints(
        self, trained: HierarchyTraining, test_case: str, test_case_path: pathlib.Path
    ) -> None:
        with open(test_case_path.joinpath("endpoints"), "r") as f:
            endpoint_map = parse_endpoint_listing(f.read())
        with open(test_case_path.joinpath("expected.json"), "r") as f:
            expected = json.load(f)

        report = classify_endpoints(trained.model, endpoint_map)
        assert report.best.label == expected["version"]
        assert report.low_confidence == expected["low_confidence"]

    def test_save_load(
        self, trained: HierarchyTraining, schema: EncodingSchema, tmp_path: pathlib.Path
    ) -> None:
        filepath = tmp_path.joinpath("model.txt")
        save_model(trained.model, filepath)
        loaded = load_model(filepath, schema.version)
        assert dumps_model(loaded) == dumps_model(trained.model)

        with open(BASE.joinpath("data/classify/linux-2.6.10/response"), "r") as f:
            resp = parse_response(f.read())
        a = classify_host(trained.model, resp, schema)
        b = classify_host(loaded, resp, schema)
        assert a.serialize() == b.serialize()

    def test_deterministic(self, schema: EncodingSchema) -> None:
        generation = GenerationConfig(size=400, version_size=200, rpc_size=100, seed=7)
        a = train(fixture_rules(), schema, generation, 30)
        b = train(fixture_rules(), schema, generation, 30)
        assert dumps_model(a.model) == dumps_model(b.model)
        assert a.traces.keys() == b.traces.keys()
        for name in a.traces:
            assert a.traces[name].errors == b.traces[name].errors

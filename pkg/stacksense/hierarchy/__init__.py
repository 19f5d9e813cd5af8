"""
The hierarchical classifier.

A host goes through up to three nets, each with its own reduction pipeline:

1. the relevance net tells whether it runs one of the relevant families,
2. the family net picks the family,
3. the version net of that family, if there's one, picks the version group.

A separate endpoint net reads the DCE-RPC endpoint map of Windows hosts and scores
every version, edition and service pack.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from stacksense.datagen import (
    EmpiricalDistribution,
    GenerationConfig,
    LabeledDataset,
    generate_dataset,
    split_indices,
)
from stacksense.datagen.rpc import RpcProfiles, generate_rpc_dataset
from stacksense.diagnostics import Messages
from stacksense.dimred import ReductionPipeline, fit_pipeline, project
from stacksense.encoder import EncodingSchema, build_nmap_schema, encode, feature_names
from stacksense.encoder.endpoints import (
    EndpointMap,
    RpcSchema,
    build_rpc_schema,
    encode_endpoints,
)
from stacksense.exceptions import SchemaMismatch, StackSenseError, TrainingError
from stacksense.fpdb import FingerprintRule, ProbeResponse
from stacksense.hierarchy.report import EndpointReport, HostReport, ReduceRow
from stacksense.labels import LabelMap
from stacksense.nn import Activation, Dataset, LayeredNet, forward, forward_batch
from stacksense.nn.training import TrainingConfig, TrainingMode, TrainingTrace, train


logger = logging.getLogger(__name__)

RELEVANCE = "relevance"
FAMILY = "family"
RPC = "rpc"
VERSION_PREFIX = "version:"

# offsets added to the generation seed so every data set draws its own patterns
VERSION_SEED_OFFSET = 1
RPC_SEED_OFFSET = 1000


@dataclass(frozen=True)
class TopologyConfig:
    """
    Hidden layer sizes.

    Attributes:
        hidden_fraction: hidden units as a fraction of the net's reduced input
        min_hidden: lower bound of the computed size
        hidden: net name -> hidden units, overrides the fraction
    """

    hidden_fraction: float = 0.3
    min_hidden: int = 2
    hidden: Dict[str, int] = field(default_factory=dict)

    def validate(self) -> None:
        if not 0.0 < self.hidden_fraction <= 1.0:
            raise ValueError(f"hidden_fraction must be in (0, 1], got {self.hidden_fraction}")
        if self.min_hidden < 1:
            raise ValueError(f"min_hidden must be positive, got {self.min_hidden}")
        for name, size in self.hidden.items():
            if size < 1:
                raise ValueError(f"{name}: hidden size must be positive, got {size}")

    def hidden_size(self, net: str, inputs: int) -> int:
        if net in self.hidden:
            return self.hidden[net]
        return max(self.min_hidden, int(round(self.hidden_fraction * inputs)))

    @classmethod
    def reference(cls) -> "TopologyConfig":
        """
        Hidden sizes the nets of the original deployment used.
        """
        return cls(
            hidden={
                RELEVANCE: 20,
                FAMILY: 20,
                f"{VERSION_PREFIX}Linux": 18,
                f"{VERSION_PREFIX}Solaris": 7,
                f"{VERSION_PREFIX}OpenBSD": 4,
            }
        )

    def serialize(self) -> dict:
        return {
            "hidden_fraction": self.hidden_fraction,
            "min_hidden": self.min_hidden,
            "hidden": dict(self.hidden),
        }


@dataclass(frozen=True)
class HierarchyConfig:
    """
    Attributes:
        relevance_threshold: hosts whose relevance output is below it stop there
        retain: variance fraction every pipeline keeps
        tolerance: residual variance below which a column counts as dependent
        scale_rate: in batch mode divide the learning rate by the number of
            training patterns, so it applies to the mean gradient
    """

    relevance_threshold: float = 0.0
    retain: float = 0.98
    tolerance: float = 1e-8
    scale_rate: bool = True

    def serialize(self) -> dict:
        return {
            "relevance_threshold": self.relevance_threshold,
            "retain": self.retain,
            "tolerance": self.tolerance,
            "scale_rate": self.scale_rate,
        }


@dataclass(eq=False)
class StageNet:
    """
    A reduction pipeline and the net fed with its output.

    Attributes:
        name: ``relevance``, ``family`` or ``version:<family>``
        pipeline: reduction fitted on the net's training inputs
        net: the trained net
        labels: name of every output unit
    """

    name: str
    pipeline: ReductionPipeline
    net: LayeredNet
    labels: List[str]

    def outputs(self, x: np.ndarray) -> np.ndarray:
        return forward(self.net, project(self.pipeline, x))[-1]

    def outputs_batch(self, x: np.ndarray) -> np.ndarray:
        return forward_batch(self.net, project(self.pipeline, x))[-1]

    def serialize(self) -> Dict[str, Any]:
        return {
            "name": self.name,
            "pipeline": self.pipeline.serialize(),
            "net": self.net.serialize(),
            "labels": list(self.labels),
        }

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "StageNet":
        return cls(
            raw["name"],
            ReductionPipeline.from_dict(raw["pipeline"]),
            LayeredNet.from_dict(raw["net"]),
            list(raw["labels"]),
        )


@dataclass(eq=False)
class RpcStage:
    """
    Attributes:
        schema_version: version of the endpoint encoding the net reads
        net: the trained net, fed with encoded endpoint maps directly
        labels: name of every output unit
        groups: output ranges, see :meth:`RpcProfiles.output_groups`
    """

    schema_version: str
    net: LayeredNet
    labels: List[str]
    groups: Dict[str, Any]

    def serialize(self) -> Dict[str, Any]:
        return {
            "schema_version": self.schema_version,
            "net": self.net.serialize(),
            "labels": list(self.labels),
            "groups": self.groups,
        }

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "RpcStage":
        return cls(
            raw["schema_version"],
            LayeredNet.from_dict(raw["net"]),
            list(raw["labels"]),
            raw["groups"],
        )


@dataclass(eq=False)
class HierarchicalModel:
    """
    Attributes:
        schema_version: version of the encoding schema every stage reads
        labels: label map the nets were trained with
        threshold: relevance gate
        relevance: the relevance stage, one output
        family: the family stage, one output per relevant family
        versions: family -> version stage
        rpc: the endpoint stage, if trained
        settings: configuration the model was trained with
    """

    schema_version: str
    labels: LabelMap
    threshold: float
    relevance: StageNet
    family: StageNet
    versions: Dict[str, StageNet] = field(default_factory=dict)
    rpc: Optional[RpcStage] = None
    settings: Dict[str, Any] = field(default_factory=dict)

    def stages(self) -> Dict[str, StageNet]:
        out = {RELEVANCE: self.relevance, FAMILY: self.family}
        for family, stage in self.versions.items():
            out[f"{VERSION_PREFIX}{family}"] = stage
        return out

    def serialize(self) -> Dict[str, Any]:
        return {
            "schema_version": self.schema_version,
            "labels": self.labels.serialize(),
            "threshold": self.threshold,
            "relevance": self.relevance.serialize(),
            "family": self.family.serialize(),
            "versions": {k: v.serialize() for k, v in self.versions.items()},
            "rpc": self.rpc.serialize() if self.rpc is not None else None,
            "settings": self.settings,
        }

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "HierarchicalModel":
        return cls(
            schema_version=raw["schema_version"],
            labels=LabelMap.from_dict(raw["labels"]),
            threshold=float(raw["threshold"]),
            relevance=StageNet.from_dict(raw["relevance"]),
            family=StageNet.from_dict(raw["family"]),
            versions={k: StageNet.from_dict(v) for k, v in raw["versions"].items()},
            rpc=RpcStage.from_dict(raw["rpc"]) if raw.get("rpc") is not None else None,
            settings=raw.get("settings", {}),
        )


@dataclass(eq=False)
class HierarchyTraining:
    """
    Result of :func:`train_hierarchy`.

    Attributes:
        model: the trained model
        traces: net name -> training trace
        dataset: patterns the relevance and family nets were built from
        held_out: indices of ``dataset`` no net was fitted on
    """

    model: HierarchicalModel
    traces: Dict[str, TrainingTrace]
    dataset: LabeledDataset
    held_out: np.ndarray


class _Trainer:
    def __init__(
        self,
        training: TrainingConfig,
        topology: TopologyConfig,
        config: HierarchyConfig,
    ) -> None:
        self.training = training
        self.topology = topology
        self.config = config
        self.traces: Dict[str, TrainingTrace] = {}
        self.count = 0

    def fit(self, name: str, data: Dataset, labels: List[str]) -> StageNet:
        """
        Fits the pipeline and trains the net of one stage on ``data``, which only
        holds training patterns.
        """
        self.count += 1
        try:
            pipeline = fit_pipeline(data.inputs, self.config.retain, self.config.tolerance)
            p = pipeline.output_dim
            if p == 0:
                raise ValueError("every input column is constant")
            hidden = self.topology.hidden_size(name, p)
            net = LayeredNet.random(
                [p, hidden, data.target_dim],
                Activation.TANH,
                seed=[self.training.seed, self.count],
            )
            reduced = Dataset(project(pipeline, data.inputs), data.targets)
            result = train(net, reduced, self._config_for(len(reduced)))
        except (StackSenseError, ValueError) as e:
            raise TrainingError(name, e) from e
        logger.info(
            "%s: %d -> %d -> %d -> %d, %d patterns, %d generations",
            name,
            data.input_dim,
            p,
            hidden,
            data.target_dim,
            len(data),
            result.trace.generations,
        )
        self.traces[name] = result.trace
        return StageNet(name, pipeline, result.net, labels)

    def fit_rpc(
        self, data: Dataset, labels: List[str], groups: Dict[str, Any], version: str
    ) -> RpcStage:
        self.count += 1
        try:
            hidden = self.topology.hidden_size(RPC, data.input_dim)
            net = LayeredNet.random(
                [data.input_dim, hidden, data.target_dim],
                Activation.TANH,
                seed=[self.training.seed, self.count],
            )
            result = train(net, data, self._config_for(len(data)))
        except (StackSenseError, ValueError) as e:
            raise TrainingError(RPC, e) from e
        self.traces[RPC] = result.trace
        return RpcStage(version, result.net, labels, groups)

    def _config_for(self, n: int) -> TrainingConfig:
        if self.config.scale_rate and self.training.mode is TrainingMode.BATCH:
            return replace(self.training, rate=self.training.rate / n)
        return self.training


def _training_part(ds: LabeledDataset, fraction: float) -> Tuple[LabeledDataset, np.ndarray]:
    train_idx, held_out = split_indices(len(ds), fraction)
    if not train_idx.size:
        raise ValueError(f"no training patterns out of {len(ds)}")
    return ds.subset(train_idx), held_out


def train_hierarchy(
    rules: List[FingerprintRule],
    dist: EmpiricalDistribution,
    schema: EncodingSchema,
    labels: LabelMap,
    generation: GenerationConfig = GenerationConfig(),
    training: TrainingConfig = TrainingConfig(),
    topology: TopologyConfig = TopologyConfig(),
    config: HierarchyConfig = HierarchyConfig(),
    rpc: Optional[Tuple[RpcProfiles, RpcSchema]] = None,
    dataset: Optional[LabeledDataset] = None,
    messages: Optional[Messages] = None,
) -> HierarchyTraining:
    """
    Generates the data sets and trains every net of the hierarchy.

    The relevance and family nets share one data set drawn from ``dist``; each
    version net gets its own, drawn from the rules of its family only. When
    ``dataset`` is given it replaces the generated shared data set and the version
    nets use its patterns of their family instead. Every data set is split by
    index and only the first ``generation.train_fraction`` of it is used for
    fitting.

    Raises:
        SchemaMismatch: ``dataset`` was encoded with another schema
        TrainingError: building one of the nets failed, ``net`` names it
    """
    generation.validate()
    training.validate()
    topology.validate()
    if dataset is None:
        dataset = generate_dataset(
            rules, dist, schema, labels, generation.size, generation.seed, messages
        )
        sliced = False
    else:
        if dataset.schema_version != schema.version:
            raise SchemaMismatch(schema.version, dataset.schema_version)
        sliced = True

    trainer = _Trainer(training, topology, config)
    try:
        train_ds, held_out = _training_part(dataset, generation.train_fraction)
    except ValueError as e:
        raise TrainingError(RELEVANCE, e) from e

    relevance = trainer.fit(RELEVANCE, train_ds.relevance_data(), ["relevant"])
    try:
        family_data = train_ds.family_data(len(labels.relevant))
    except StackSenseError as e:
        raise TrainingError(FAMILY, e) from e
    family = trainer.fit(FAMILY, family_data, list(labels.relevant))

    versions: Dict[str, StageNet] = {}
    for f, name in enumerate(labels.relevant):
        groups = labels.version_labels(name)
        if not groups:
            continue
        net_name = f"{VERSION_PREFIX}{name}"
        if sliced:
            source = train_ds
        else:
            members = [r for r in rules if labels.family_of(r) == f]
            if not members:
                logger.warning("%s: no rule of family %s, skipping", net_name, name)
                continue
            size = generation.version_size or generation.size
            try:
                generated = generate_dataset(
                    members, dist, schema, labels, size, generation.seed + VERSION_SEED_OFFSET + f
                )
                source, _ = _training_part(generated, generation.train_fraction)
            except (StackSenseError, ValueError) as e:
                raise TrainingError(net_name, e) from e
        present = set(source.version[source.family == f].tolist()) - {-1}
        if len(present) < 2:
            logger.warning(
                "%s: %d version group(s) in the data, skipping", net_name, len(present)
            )
            continue
        versions[name] = trainer.fit(net_name, source.version_data(f, len(groups)), groups)

    rpc_stage = None
    if rpc is not None:
        profiles, rpc_schema = rpc
        try:
            rpc_ds = generate_rpc_dataset(
                profiles, rpc_schema, generation.rpc_size, generation.seed + RPC_SEED_OFFSET
            )
            cut, _ = split_indices(len(rpc_ds), generation.train_fraction)
            rpc_train = rpc_ds.subset(cut).data
        except (StackSenseError, ValueError) as e:
            raise TrainingError(RPC, e) from e
        rpc_stage = trainer.fit_rpc(
            rpc_train, profiles.output_labels(), profiles.output_groups(), rpc_schema.version
        )

    settings = {
        "generation": generation.serialize(),
        "training": training.serialize(),
        "topology": topology.serialize(),
        "hierarchy": config.serialize(),
    }
    model = HierarchicalModel(
        schema.version,
        labels,
        config.relevance_threshold,
        relevance,
        family,
        versions,
        rpc_stage,
        settings,
    )
    return HierarchyTraining(model, trainer.traces, dataset, held_out)


def _check_schema(model: HierarchicalModel, schema: Optional[EncodingSchema]) -> EncodingSchema:
    schema = schema if schema is not None else build_nmap_schema()
    if schema.version != model.schema_version:
        raise SchemaMismatch(model.schema_version, schema.version)
    return schema


def classify_vector(model: HierarchicalModel, x: np.ndarray) -> HostReport:
    """
    Runs an encoded response through the hierarchy.
    """
    score = float(model.relevance.outputs(x)[0])
    report = HostReport(relevance=score, threshold=model.threshold)
    if score < model.threshold:
        return report
    report.family_labels = list(model.family.labels)
    report.family_scores = model.family.outputs(x).tolist()
    family = report.family_labels[int(np.argmax(report.family_scores))]
    report.family = family
    stage = model.versions.get(family)
    if stage is not None:
        report.version_labels = list(stage.labels)
        report.version_scores = stage.outputs(x).tolist()
        report.version = report.version_labels[int(np.argmax(report.version_scores))]
    return report


def classify_host(
    model: HierarchicalModel,
    resp: ProbeResponse,
    schema: Optional[EncodingSchema] = None,
    messages: Optional[Messages] = None,
) -> HostReport:
    """
    Encodes ``resp`` with ``schema`` (the shipped one by default) and runs it
    through the hierarchy.

    Raises:
        SchemaMismatch: the model was trained with another schema
    """
    schema = _check_schema(model, schema)
    return classify_vector(model, encode(resp, schema, messages))


def classify_endpoints(
    model: HierarchicalModel, endpoint_map: EndpointMap, schema: Optional[RpcSchema] = None
) -> EndpointReport:
    """
    Scores every version, edition and service pack. The decided version is the
    best scored one, its edition and service pack the best scored within its
    groups.

    Raises:
        ValueError: the model has no endpoint net
        SchemaMismatch: the endpoint net was trained with another schema
    """
    if model.rpc is None:
        raise ValueError("the model has no endpoint net")
    schema = schema if schema is not None else build_rpc_schema()
    if schema.version != model.rpc.schema_version:
        raise SchemaMismatch(model.rpc.schema_version, schema.version)
    y = forward(model.rpc.net, encode_endpoints(endpoint_map, schema))[-1]
    return EndpointReport.from_outputs(
        y.tolist(), model.rpc.labels, model.rpc.groups, empty=not endpoint_map.entries
    )


@dataclass
class Evaluation:
    """
    Held-out accuracy of every stage, ``None`` when there was nothing to test.

    Attributes:
        relevance: share of patterns on the right side of the gate
        family: share of relevant patterns whose family is the best scored
        versions: family -> share of its patterns whose group is the best scored
        counts: number of patterns behind every figure
    """

    relevance: Optional[float] = None
    family: Optional[float] = None
    versions: Dict[str, Optional[float]] = field(default_factory=dict)
    counts: Dict[str, int] = field(default_factory=dict)

    def serialize(self) -> Dict[str, Any]:
        return {
            "relevance": self.relevance,
            "family": self.family,
            "versions": dict(self.versions),
            "counts": dict(self.counts),
        }


def _accuracy(hits: np.ndarray) -> Optional[float]:
    return float(np.mean(hits)) if hits.size else None


def evaluate(
    model: HierarchicalModel, ds: LabeledDataset, indices: Optional[np.ndarray] = None
) -> Evaluation:
    """
    Accuracy of every stage on the patterns ``indices`` of ``ds`` (all by default).
    Every stage is tested on its own, with the true label of the previous one.
    """
    if ds.schema_version != model.schema_version:
        raise SchemaMismatch(model.schema_version, ds.schema_version)
    if indices is not None:
        ds = ds.subset(indices)
    out = Evaluation()
    if not len(ds):
        return out
    gate = model.relevance.outputs_batch(ds.inputs)[:, 0] >= model.threshold
    out.relevance = _accuracy(gate == ds.relevant)
    out.counts[RELEVANCE] = len(ds)

    idx = ds.family_indices()
    if idx.size:
        picked = np.argmax(model.family.outputs_batch(ds.inputs[idx]), axis=1)
        out.family = _accuracy(picked == ds.family[idx])
        out.counts[FAMILY] = int(idx.size)

    for name, stage in model.versions.items():
        f = model.labels.relevant.index(name)
        idx = np.flatnonzero((ds.family == f) & (ds.version >= 0))
        if idx.size:
            picked = np.argmax(stage.outputs_batch(ds.inputs[idx]), axis=1)
            out.versions[name] = _accuracy(picked == ds.version[idx])
        else:
            out.versions[name] = None
        out.counts[f"{VERSION_PREFIX}{name}"] = int(idx.size)
    return out


def reduce_report(
    model: HierarchicalModel, net: str, schema: Optional[EncodingSchema] = None
) -> List[ReduceRow]:
    """
    Input columns the pipeline of ``net`` keeps: new position, original position
    and name of the field.
    """
    schema = _check_schema(model, schema)
    stages = model.stages()
    if net not in stages:
        raise ValueError(f"unknown net '{net}', expected one of {', '.join(stages)}")
    names = feature_names(schema)
    return [
        ReduceRow(i, original, names[original])
        for i, original in enumerate(stages[net].pipeline.kept)
    ]


__all__ = (
    "Evaluation",
    "HierarchicalModel",
    "HierarchyConfig",
    "HierarchyTraining",
    "RpcStage",
    "StageNet",
    "TopologyConfig",
    "classify_endpoints",
    "classify_host",
    "classify_vector",
    "evaluate",
    "reduce_report",
    "train_hierarchy",
)

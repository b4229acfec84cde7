"""Ordered, type-checked pipeline construction and execution.

A pipeline is an ordered list of configured components.  Build-time
validation guarantees that any accepted spec can never hit a payload-type
mismatch at run time: each component declares its input and output payload
tags and consecutive components must be compatible.
"""

from __future__ import annotations

import pickle
from dataclasses import dataclass, field
from pathlib import Path

from . import preprocessing
from .acquisition import AcquisitionResult, DatasetIndex, SignalRegistry, acquire, scan_dataset
from .classification import ClassifierSpec, CVStrategy, cross_validate, fit, predict
from .errors import (
    IncompatibleStages,
    MisorderedStage,
    MissingStage,
    StageExecutionError,
)
from .features import FeatureCatalogEntry, WindowingPolicy, extract_features
from .labels import LabelRule, attach_labels, load_reports, one_hot_encode, sequential_forward_selection
from .types import FeatureMatrix, LabelVector, SubjectBundle, is_absent

# payload tags threaded between stages
NONE, BUNDLE, FEATURES, LABELED, OUTPUT = (
    "none", "bundle", "features", "labeled-features", "output")


@dataclass
class RunContext:
    seed: int = 0
    strict: bool = False
    checkpoint_dir: Path | None = None
    reports: dict = field(default_factory=dict)


class Component:
    """Base class for pipeline stages."""

    kind: str
    input_type: str
    output_type: str

    def run(self, payload, ctx: RunContext):
        raise NotImplementedError


class SignalAcquisition(Component):
    kind = "Acquisition"
    input_type = NONE
    output_type = BUNDLE

    def __init__(self, signal_types, source_folder, registry: SignalRegistry | None = None):
        self.signal_types = list(signal_types)
        self.source_folder = Path(source_folder)
        self.registry = registry or SignalRegistry.default()

    def run(self, payload, ctx):
        index = scan_dataset(self.source_folder, self.registry)
        result: AcquisitionResult = acquire(index, self.signal_types, strict=ctx.strict)
        ctx.reports["excluded_subjects"] = list(result.excluded_subjects)
        ctx.reports["skipped_files"] = [str(p) for p in result.skipped_files]
        ctx.reports["dataset_index"] = index
        return result.bundle


class SignalPreprocessor(Component):
    kind = "Preprocessor"
    input_type = BUNDLE
    output_type = BUNDLE

    def __init__(self, preprocessing_methods=None, resample_rate=None):
        self.chains = dict(preprocessing_methods or {})
        self.resample_rate = resample_rate

    def run(self, bundle: SubjectBundle, ctx):
        return preprocessing.preprocess(bundle, self.chains, self.resample_rate)


class FeatureExtractor(Component):
    kind = "FeatureExtractor"
    input_type = BUNDLE
    output_type = FEATURES

    def __init__(self, feature_extraction_methods, windowing: WindowingPolicy,
                 calculate_average: bool = True):
        self.catalog = list(feature_extraction_methods)
        self.windowing = windowing
        self.calculate_average = calculate_average

    def run(self, bundle: SubjectBundle, ctx):
        return extract_features(bundle, self.windowing, self.catalog,
                                self.calculate_average)


class LabelGenerator(Component):
    kind = "LabelGenerator"
    input_type = FEATURES
    output_type = LABELED

    def __init__(self, label_generation_method: LabelRule, reports_loader=None):
        self.rule = label_generation_method
        # callable ctx -> list[SelfReport]; defaults to reading the
        # per-subject report files found during the dataset scan
        self.reports_loader = reports_loader

    def _reports(self, ctx):
        if self.reports_loader is not None:
            return self.reports_loader(ctx)
        index: DatasetIndex | None = ctx.reports.get("dataset_index")
        if index is None:
            return None
        reports = []
        for subject, path in sorted(index.report_files.items()):
            reports.extend(load_reports(path, subject))
        return reports or None

    def run(self, matrix: FeatureMatrix, ctx):
        reports = None
        if self.rule.kind in ("fixed-threshold", "dynamic-threshold"):
            reports = self._reports(ctx)
            if reports is not None:
                # keep only the questionnaire the threshold rule consumes
                wanted = self.rule.parameters.get(
                    "questionnaire",
                    "SUDS" if self.rule.kind == "fixed-threshold" else "STAI")
                reports = [r for r in reports
                           if r.questionnaire.upper() == wanted.upper()] or None
        matrix, labels, dropped = attach_labels(matrix, self.rule, reports,
                                                strict=ctx.strict)
        ctx.reports["rows_without_labels"] = dropped
        return matrix, labels


class FeatureSelector(Component):
    kind = "FeatureSelector"
    input_type = LABELED
    output_type = LABELED

    def __init__(self, k: int, scorer: ClassifierSpec, cv_folds: int = 5):
        self.k = k
        self.scorer = scorer
        self.cv_folds = cv_folds

    def run(self, payload, ctx):
        matrix, labels = payload
        matrix = one_hot_encode(matrix)
        selected = sequential_forward_selection(
            matrix, labels, self.scorer, self.k, self.cv_folds, seed=ctx.seed)
        ctx.reports["selected_features"] = list(selected.columns)
        return selected, labels


@dataclass(frozen=True)
class PipelineOutput:
    fitted_models: dict
    y_true: LabelVector
    y_pred: dict
    scores: dict
    report: object  # EvaluationReport (cross-validation mode) or None


class Classification(Component):
    kind = "Classification"
    input_type = LABELED
    output_type = OUTPUT

    MODE_TRAIN, MODE_TEST, MODE_CROSS_VALIDATE = 0, 1, 2

    def __init__(self, mode: int, models: dict[str, ClassifierSpec] | list,
                 cv: CVStrategy | None = None, pretrained: dict | None = None):
        if isinstance(models, dict):
            models = [ClassifierSpec(name, spec.algorithm, spec.hyperparameters)
                      if isinstance(spec, ClassifierSpec)
                      else ClassifierSpec(name, "custom", {"handle": spec})
                      for name, spec in models.items()]
        self.mode = mode
        self.models = list(models)
        self.cv = cv
        self.pretrained = pretrained or {}

    def run(self, payload, ctx):
        matrix, labels = payload
        matrix = one_hot_encode(matrix)
        # rows with absent cells are dropped, with labels kept aligned
        keep, dropped = [], []
        for i, row in enumerate(matrix.rows):
            if any(is_absent(v) for v in row.values):
                dropped.append((row.subject_id, row.phase, row.window_index))
            else:
                keep.append(i)
        ctx.reports["dropped_rows"] = dropped
        if dropped:
            matrix = matrix.subset_rows(keep)
            labels = labels.subset(keep)
        if self.mode == self.MODE_CROSS_VALIDATE:
            cv = self.cv or CVStrategy("kfold", 5, ctx.seed)
            if cv.kind == "kfold" and cv.shuffle_seed == 0 and ctx.seed:
                cv = CVStrategy(cv.kind, cv.folds, ctx.seed)
            report, artifacts = cross_validate(self.models, matrix, labels, cv)
            return PipelineOutput(
                fitted_models=artifacts["fitted_models"],
                y_true=LabelVector(tuple(artifacts["y_true"]), labels.class_names),
                y_pred=artifacts["y_pred"],
                scores=artifacts["scores"],
                report=report,
            )
        if self.mode == self.MODE_TRAIN:
            fitted, y_pred, scores = {}, {}, {}
            for spec in self.models:
                model = fit(spec, matrix, labels)
                fitted[spec.name] = model
                y_pred[spec.name], scores[spec.name] = predict(model, matrix.to_array())
            return PipelineOutput(fitted, labels, y_pred, scores, report=None)
        if self.mode == self.MODE_TEST:
            y_pred, scores = {}, {}
            for name, model in self.pretrained.items():
                y_pred[name], scores[name] = predict(model, matrix.to_array())
            return PipelineOutput(dict(self.pretrained), labels, y_pred, scores,
                                  report=None)
        raise ValueError(f"unknown classification mode {self.mode}")


@dataclass(frozen=True)
class PipelineSpec:
    stages: tuple[Component, ...]
    seed: int = 0
    strict: bool = False
    checkpoint_dir: Path | None = None


class Pipeline:
    """Validated, executable stage sequence."""

    def __init__(self, spec: PipelineSpec):
        self.spec = spec
        self.stages = list(spec.stages)

    def run(self) -> PipelineOutput:
        ctx = RunContext(seed=self.spec.seed, strict=self.spec.strict,
                         checkpoint_dir=self.spec.checkpoint_dir)
        payload = None
        for i, stage in enumerate(self.stages):
            try:
                payload = stage.run(payload, ctx)
            except Exception as exc:
                if isinstance(exc, StageExecutionError):
                    raise
                raise StageExecutionError(i, stage.kind, exc) from exc
            if ctx.checkpoint_dir is not None:
                ctx.checkpoint_dir.mkdir(parents=True, exist_ok=True)
                with (ctx.checkpoint_dir / f"stage_{i}_{stage.kind}.pkl").open("wb") as fh:
                    pickle.dump(payload, fh)
        self.last_reports = ctx.reports
        return payload


REQUIRED_KINDS = ("Acquisition", "Preprocessor", "LabelGenerator", "Classification")


def build_pipeline(spec: PipelineSpec) -> Pipeline:
    """Validate ordering and type compatibility; report the first problem.

    Raises MissingStage, MisorderedStage, or IncompatibleStages(i, i+1).
    """
    stages = list(spec.stages)
    kinds = [s.kind for s in stages]
    for kind in REQUIRED_KINDS:
        if kind not in kinds:
            raise MissingStage(kind)
    if kinds[0] != "Acquisition":
        raise MisorderedStage("Acquisition", "must be the first stage")
    if kinds[-1] != "Classification":
        raise MisorderedStage("Classification", "must be the last stage")
    if kinds.count("Acquisition") > 1 or kinds.count("Classification") > 1:
        raise MisorderedStage("Acquisition", "duplicate terminal stage")
    if "FeatureSelector" in kinds and \
            kinds.index("FeatureSelector") < kinds.index("LabelGenerator"):
        raise MisorderedStage("FeatureSelector", "needs labels; place it after "
                              "the LabelGenerator")
    for i in range(len(stages) - 1):
        if stages[i].output_type != stages[i + 1].input_type:
            raise IncompatibleStages(i, i + 1, stages[i].output_type,
                                     stages[i + 1].input_type)
    return Pipeline(spec)

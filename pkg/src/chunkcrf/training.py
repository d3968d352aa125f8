"""Training: regularized conditional log-likelihood maximized with L-BFGS.

The objective over a dataset is

    sum over instances [ gold-path score - log Z ]  -  lam * ||w||^2

and its gradient is gold-path feature counts minus expected feature counts
(from edge posteriors) minus ``2 * lam * w``.  Both are returned in
maximization orientation; the optimizer loop negates them.  Evaluation over
instances may be spread across threads, but per-instance contributions are
always reduced in dataset order so results are bit-reproducible.

Chunks longer than the segment-length limit cannot be represented in the
segment lattices; such spans are dropped from the gold structure (their
tokens become outside) before training, and the dropped count is reported.
"""

from __future__ import annotations

import json
import logging
import struct
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .core import (
    CharSpan,
    LabelSet,
    Sentence,
    WordSpan,
    char_spans_to_word_spans,
    word_spans_to_char_spans,
)
from .features import (
    BrownClusterMap,
    FeatureConfig,
    FeatureDictionary,
    FeatureExtractor,
)
from .ingest import AnnotatedText
from .lattice import MODEL_KINDS, LatticeError, build_lattice
from .inference import edge_scores, marginals_from_scores, viterbi

log = logging.getLogger("chunkcrf")

LAMBDA_GRID = (0.125, 0.25, 0.5, 1.0, 2.0)

LBFGS_HISTORY = 10


class NumericalError(RuntimeError):
    """Objective or gradient became non-finite."""


class ModelFormatError(ValueError):
    """Model file has a bad magic number, version, or structure."""


@dataclass(frozen=True)
class TrainConfig:
    model_kind: str
    lam: float
    max_seg_len: int = 6
    use_affix: bool = False
    use_brown: bool = False
    use_shape: bool = False
    max_iterations: int = 500
    tolerance: float = 1e-6
    threads: int = 1

    def __post_init__(self) -> None:
        if self.model_kind not in MODEL_KINDS:
            raise ValueError(f"unknown model kind {self.model_kind!r}")
        if not self.lam > 0:
            raise ValueError("regularization strength must be positive")
        if self.max_seg_len < 1:
            raise ValueError("max_seg_len must be >= 1")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")

    @property
    def feature_config(self) -> FeatureConfig:
        return FeatureConfig(
            use_affix=self.use_affix,
            use_brown=self.use_brown,
            use_shape=self.use_shape,
            max_seg_len=self.max_seg_len,
        )


@dataclass(frozen=True)
class DataItem:
    sentence: Sentence
    word_spans: tuple[WordSpan, ...]
    char_spans: tuple[CharSpan, ...] | None = None

    def __post_init__(self) -> None:
        prev_last = -1
        for span in sorted(self.word_spans, key=lambda s: s.first_token):
            if span.first_token <= prev_last:
                raise ValueError("gold word spans overlap")
            if span.last_token >= len(self.sentence):
                raise ValueError("gold word span outside sentence")
            prev_last = span.last_token


@dataclass
class Dataset:
    """Instances with gold word spans; original char spans kept when known."""

    items: list[DataItem]
    split: str = "train"

    def __len__(self) -> int:
        return len(self.items)

    @classmethod
    def from_pairs(cls, pairs: list[tuple[Sentence, list[WordSpan]]], split: str = "train") -> "Dataset":
        return cls([DataItem(s, tuple(spans)) for s, spans in pairs], split)

    @classmethod
    def from_annotated(cls, items: list[AnnotatedText], split: str = "train") -> "Dataset":
        data = []
        for item in items:
            word = char_spans_to_word_spans(item.sentence, list(item.char_spans))
            data.append(DataItem(item.sentence, tuple(word), item.char_spans))
        return cls(data, split)

    def chunk_labels(self) -> tuple[str, ...]:
        labels = {span.label for item in self.items for span in item.word_spans}
        return tuple(sorted(labels))

    def clip_spans(self, max_len: int) -> tuple["Dataset", int]:
        """Drop chunk spans longer than ``max_len`` (their tokens become
        outside); returns the clipped dataset and the dropped-span count."""
        dropped = 0
        items = []
        for item in self.items:
            kept = tuple(s for s in item.word_spans if s.length <= max_len)
            dropped += len(item.word_spans) - len(kept)
            items.append(DataItem(item.sentence, kept, item.char_spans))
        return Dataset(items, self.split), dropped


def derive_label_set(dataset: Dataset, label_set: LabelSet | None = None) -> LabelSet:
    if label_set is not None:
        return label_set
    labels = dataset.chunk_labels()
    if not labels:
        raise ValueError("dataset has no chunk spans; pass an explicit label set")
    return LabelSet(labels)


def build_feature_space(
    dataset: Dataset,
    label_set: LabelSet,
    config: TrainConfig,
    brown: BrownClusterMap | None = None,
) -> tuple[FeatureDictionary, int]:
    """One pass over the data registering every lattice feature, then freeze.

    Returns the frozen dictionary and the total lattice edge count.
    """
    dictionary = FeatureDictionary()
    extractor = FeatureExtractor(config.feature_config, dictionary, brown)
    edges = 0
    for item in dataset.items:
        if len(item.sentence) == 0:
            continue
        lat = build_lattice(config.model_kind, item.sentence, label_set, config.max_seg_len, extractor)
        edges += lat.num_edges
    dictionary.freeze()
    return dictionary, edges


class ObjectiveEvaluator:
    """Bound objective/gradient over a fixed dataset, dictionary, and config.

    Instances whose gold structure is not representable in their lattice are
    detected once up front, logged, and skipped thereafter.
    """

    def __init__(
        self,
        dataset: Dataset,
        label_set: LabelSet,
        config: TrainConfig,
        dictionary: FeatureDictionary,
        brown: BrownClusterMap | None = None,
    ) -> None:
        self.label_set = label_set
        self.config = config
        self.dictionary = dictionary
        self.extractor = FeatureExtractor(config.feature_config, dictionary, brown)
        self.lam = config.lam
        self.threads = config.threads
        self.items: list[DataItem] = []
        self.skipped = 0
        for item in dataset.items:
            if len(item.sentence) == 0:
                self.skipped += 1
                log.warning("skipping empty sentence %r", item.sentence.raw_text)
                continue
            lat = self._lattice(item)
            try:
                lat.gold_edge_ids(list(item.word_spans))
            except LatticeError as exc:
                self.skipped += 1
                log.warning("skipping unrepresentable instance (%s): %r", exc, item.sentence.raw_text)
                continue
            self.items.append(item)
        if not self.items:
            raise ValueError("no trainable instances")

    def _lattice(self, item: DataItem):
        return build_lattice(
            self.config.model_kind, item.sentence, self.label_set, self.config.max_seg_len, self.extractor
        )

    def _instance_terms(self, item: DataItem, weights: np.ndarray):
        lat = self._lattice(item)
        scores = edge_scores(lat, weights)
        marg = marginals_from_scores(lat, scores)
        gold_edges = lat.gold_edge_ids(list(item.word_spans))
        gold_score = float(scores[gold_edges].sum())
        value = gold_score - marg.log_partition
        gold_slices = [slice(lat.feat_ptr[e], lat.feat_ptr[e + 1]) for e in gold_edges]
        gold_idx = np.concatenate([lat.feat_idx[s] for s in gold_slices]) if gold_slices else lat.feat_idx[:0]
        gold_val = np.concatenate([lat.feat_val[s] for s in gold_slices]) if gold_slices else lat.feat_val[:0]
        expected_val = -marg.edge_posteriors[lat.feat_edge] * lat.feat_val
        return value, gold_idx, gold_val, lat.feat_idx, expected_val

    def objective_and_gradient(self, weights: np.ndarray) -> tuple[float, np.ndarray]:
        w = np.asarray(weights, dtype=np.float64)
        if len(w) != len(self.dictionary):
            raise ValueError(f"weight vector of length {len(w)} does not match {len(self.dictionary)} features")

        if self.threads > 1:
            with ThreadPoolExecutor(max_workers=self.threads) as pool:
                terms = list(pool.map(lambda it: self._instance_terms(it, w), self.items))
        else:
            terms = [self._instance_terms(item, w) for item in self.items]

        value = 0.0
        idx_parts: list[np.ndarray] = []
        val_parts: list[np.ndarray] = []
        for v, gidx, gval, eidx, eval_ in terms:
            value += v
            idx_parts.append(gidx)
            val_parts.append(gval)
            idx_parts.append(eidx)
            val_parts.append(eval_)

        dim = len(self.dictionary)
        if idx_parts:
            grad = np.bincount(
                np.concatenate(idx_parts), weights=np.concatenate(val_parts), minlength=dim
            )
        else:
            grad = np.zeros(dim)
        value -= self.lam * float(w @ w)
        grad -= 2.0 * self.lam * w
        if not np.isfinite(value) or not np.all(np.isfinite(grad)):
            raise NumericalError("objective or gradient is not finite")
        return value, grad


def objective_and_gradient(
    dataset: Dataset,
    weights: np.ndarray,
    config: TrainConfig,
    dictionary: FeatureDictionary,
    label_set: LabelSet | None = None,
    brown: BrownClusterMap | None = None,
) -> tuple[float, np.ndarray]:
    """One-shot maximization objective and gradient (convenience wrapper)."""
    label_set = derive_label_set(dataset, label_set)
    evaluator = ObjectiveEvaluator(dataset, label_set, config, dictionary, brown)
    return evaluator.objective_and_gradient(weights)


@dataclass
class Model:
    """A trained chunker: label set, feature space, and weights."""

    model_kind: str
    label_set: LabelSet
    feature_config: FeatureConfig
    dictionary: FeatureDictionary
    weights: np.ndarray
    brown: BrownClusterMap | None = None
    metadata: dict = field(default_factory=dict)

    def extractor(self) -> FeatureExtractor:
        return FeatureExtractor(self.feature_config, self.dictionary, self.brown)

    def predict(self, sentence: Sentence) -> list[WordSpan]:
        if len(sentence) == 0:
            return []
        lat = build_lattice(
            self.model_kind, sentence, self.label_set, self.feature_config.max_seg_len, self.extractor()
        )
        spans, _ = viterbi(lat, self.weights)
        return spans

    def predict_char_spans(self, sentence: Sentence) -> list[CharSpan]:
        return word_spans_to_char_spans(sentence, self.predict(sentence))


def train(
    dataset: Dataset,
    config: TrainConfig,
    brown: BrownClusterMap | None = None,
    label_set: LabelSet | None = None,
    log_path: str | None = None,
) -> Model:
    """Fit weights from zero with L-BFGS (history 10) until the relative
    objective change drops below the tolerance or the iteration cap."""
    if len(dataset) == 0:
        raise ValueError("training split is empty")
    label_set = derive_label_set(dataset, label_set)
    clipped, dropped = dataset.clip_spans(config.max_seg_len)
    if dropped:
        log.info("dropped %d gold spans longer than %d tokens", dropped, config.max_seg_len)
    dictionary, _ = build_feature_space(clipped, label_set, config, brown)
    if len(dictionary) == 0:
        raise ValueError("no features extracted from the training split")
    evaluator = ObjectiveEvaluator(clipped, label_set, config, dictionary, brown)

    last_eval = {"value": np.nan, "grad_norm": np.nan}

    def fun(w: np.ndarray) -> tuple[float, np.ndarray]:
        value, grad = evaluator.objective_and_gradient(w)
        last_eval["value"] = value
        last_eval["grad_norm"] = float(np.linalg.norm(grad))
        return -value, -grad

    iteration_seconds: list[float] = []
    trace: list[tuple[int, float, float, float]] = []
    clock = {"t": time.perf_counter()}

    def callback(_xk: np.ndarray) -> None:
        now = time.perf_counter()
        iteration_seconds.append(now - clock["t"])
        clock["t"] = now
        trace.append((len(iteration_seconds), last_eval["value"], last_eval["grad_norm"], iteration_seconds[-1]))

    w0 = np.zeros(len(dictionary))
    result = minimize(
        fun,
        w0,
        jac=True,
        method="L-BFGS-B",
        callback=callback,
        options={
            "maxiter": config.max_iterations,
            "ftol": config.tolerance,
            "gtol": 1e-10,
            "maxcor": LBFGS_HISTORY,
        },
    )

    if log_path is not None:
        with open(log_path, "w", encoding="utf-8") as fh:
            fh.write("iter, objective, grad_norm, seconds\n")
            for it, value, gnorm, secs in trace:
                fh.write(f"{it}, {value:.10g}, {gnorm:.6g}, {secs:.6f}\n")

    metadata = {
        "iterations": int(result.nit),
        "final_objective": float(-result.fun),
        "converged": bool(result.success),
        "clipped_spans": dropped,
        "skipped_instances": evaluator.skipped,
        "per_iteration_seconds": iteration_seconds,
    }
    return Model(
        config.model_kind,
        label_set,
        config.feature_config,
        dictionary,
        np.asarray(result.x, dtype=np.float64).copy(),
        brown,
        metadata,
    )


def tune_lambda(
    train_split: Dataset,
    dev_split: Dataset,
    config: TrainConfig,
    grid: tuple[float, ...] = LAMBDA_GRID,
    brown: BrownClusterMap | None = None,
    label_set: LabelSet | None = None,
):
    """Train once per grid point and pick the best character-level dev F1.

    Ties go to the larger regularization strength.  Returns the chosen value
    and a per-grid-point report dict.
    """
    from .evaluate import score_corpus  # local import to avoid a cycle

    if len(train_split) == 0 or len(dev_split) == 0:
        raise ValueError("tuning needs non-empty train and dev splits")
    label_set = derive_label_set(train_split, label_set)
    reports = {}
    best_lam = None
    best_f1 = -1.0
    for lam in sorted(grid):
        model = train(train_split, replace(config, lam=lam), brown, label_set)
        gold, predicted = [], []
        for item in dev_split.items:
            if item.char_spans is not None:
                gold.append(list(item.char_spans))
            else:
                gold.append(word_spans_to_char_spans(item.sentence, list(item.word_spans)))
            predicted.append(model.predict_char_spans(item.sentence))
        report = score_corpus(gold, predicted, level="char")
        reports[lam] = report
        if report.f1 >= best_f1:
            best_f1 = report.f1
            best_lam = lam
    return best_lam, reports


# ----------------------------------------------------------------------
# Serialization: versioned binary container, plus a JSON debug export.
# ----------------------------------------------------------------------

MODEL_MAGIC = b"CKCRFMDL"
MODEL_VERSION = 1

# Volatile fields (wall-clock times) stay out of the file so identical
# configurations produce byte-identical models.
_PERSISTED_METADATA = ("iterations", "final_objective", "converged", "clipped_spans", "skipped_instances")


def _model_header(model: Model) -> dict:
    return {
        "model_kind": model.model_kind,
        "chunk_labels": list(model.label_set.chunk_labels),
        "feature_config": {
            "use_affix": model.feature_config.use_affix,
            "use_brown": model.feature_config.use_brown,
            "use_shape": model.feature_config.use_shape,
            "affix_max_len": model.feature_config.affix_max_len,
            "max_seg_len": model.feature_config.max_seg_len,
        },
        "brown": model.brown.entries if model.brown is not None else None,
        "features": list(model.dictionary.strings),
        "metadata": {k: model.metadata[k] for k in _PERSISTED_METADATA if k in model.metadata},
    }


def save_model(model: Model, path: str) -> None:
    header = json.dumps(_model_header(model), sort_keys=True, ensure_ascii=True, separators=(",", ":")).encode()
    weights = np.ascontiguousarray(model.weights, dtype="<f8").tobytes()
    with open(path, "wb") as fh:
        fh.write(MODEL_MAGIC)
        fh.write(struct.pack("<I", MODEL_VERSION))
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        fh.write(struct.pack("<Q", len(model.weights)))
        fh.write(weights)


def load_model(path: str) -> Model:
    with open(path, "rb") as fh:
        magic = fh.read(len(MODEL_MAGIC))
        if magic != MODEL_MAGIC:
            raise ModelFormatError(f"{path}: not a model file (bad magic)")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != MODEL_VERSION:
            raise ModelFormatError(f"{path}: unsupported model version {version}")
        (header_len,) = struct.unpack("<Q", fh.read(8))
        header = json.loads(fh.read(header_len).decode())
        (dim,) = struct.unpack("<Q", fh.read(8))
        weights = np.frombuffer(fh.read(dim * 8), dtype="<f8").astype(np.float64)
    fc = header["feature_config"]
    dictionary = FeatureDictionary.from_strings(header["features"])
    if len(dictionary) != dim:
        raise ModelFormatError(f"{path}: feature table and weight vector disagree")
    return Model(
        header["model_kind"],
        LabelSet(tuple(header["chunk_labels"])),
        FeatureConfig(
            use_affix=fc["use_affix"],
            use_brown=fc["use_brown"],
            use_shape=fc["use_shape"],
            affix_max_len=fc["affix_max_len"],
            max_seg_len=fc["max_seg_len"],
        ),
        dictionary,
        weights,
        BrownClusterMap(header["brown"]) if header["brown"] is not None else None,
        dict(header["metadata"]),
    )


def export_model_json(model: Model) -> dict:
    """Human-inspectable dump: header plus the raw weight list."""
    header = _model_header(model)
    header["weights"] = [float(w) for w in model.weights]
    return header

"""Engine assembly, the two classification pipelines, and the audit trail.

The hierarchical pipeline runs in three steps: a chapter softmax picks l*, a
heading model under l* picks m* (per-branch or conditional composition), and
the 6-digit class comes from similarity search under m* along two independent
routes: nearest training descriptions (k-NN over embeddings) and the
per-subheading knowledge graphs built from the schedule text.  Both candidate
lists are merged into one ranking with their sources recorded; graph evidence
wins ties because schedule text is authoritative while training labels carry
human error.

The flat pipeline is the comparison baseline: one softmax over every 6-digit
class including the reserved OTHERS bucket; an OTHERS argmax means the input
is unassignable.

An engine is an immutable snapshot.  Its on-disk bundle is a directory of
JSON and raw float blobs plus a manifest of content hashes; rebuilding with
the same seed reproduces every byte, which is what makes audit trails
verifiable after the fact.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from .classify import (
    ConstantModel,
    SoftmaxModel,
    TrainConfig,
    argmax_class,
    hierarchical_predict,
    model_from_parts,
    model_to_parts,
    predict_proba,
    train,
)
from .embed import EmbedderConfig, Embedding, make_embedder
from .errors import HsClassifyError
from .extract import ExtractionRuleSet, NoEntitiesError
from .kgraph import KnowledgeGraph, build_graph, rank_top_k
from .nomenclature import (
    HsCode,
    Level,
    TariffSchedule,
    UnknownCodeError,
    codes_under,
    describe,
)
from .preprocess import (
    OTHERS,
    Dataset,
    DatasetFormatError,
    Lexicon,
    NumericStats,
    clean_for_inference,
    group_low_frequency,
)


class NotTrainedError(HsClassifyError):
    code = "NotTrained"


class EmptyAfterCleaningError(HsClassifyError):
    code = "EmptyAfterCleaning"


class UnknownHeadingError(HsClassifyError):
    code = "UnknownHeading"


class EmptyTestSetError(HsClassifyError):
    code = "EmptyTestSet"


class BundleFormatError(HsClassifyError):
    code = "BundleFormat"


# ---------------------------------------------------------------------------
# Configuration and request/response types
# ---------------------------------------------------------------------------

KG_SOURCE = "KnowledgeGraph"
KNN_SOURCE = "TrainKNN"
FLAT_SOURCE = "Flat"


@dataclass
class EngineConfig:
    embedder: EmbedderConfig = field(default_factory=EmbedderConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    mode: str = "per_branch"
    knn_k: int = 3
    kg_k: int = 3
    min_class_fraction: float = 0.001

    def to_dict(self) -> dict:
        return {
            "embedder": self.embedder.to_dict(),
            "train": self.train.to_dict(),
            "mode": self.mode,
            "knn_k": self.knn_k,
            "kg_k": self.kg_k,
            "min_class_fraction": self.min_class_fraction,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "EngineConfig":
        return cls(
            embedder=EmbedderConfig.from_dict(data["embedder"]),
            train=TrainConfig.from_dict(data["train"]),
            mode=data.get("mode", "per_branch"),
            knn_k=data.get("knn_k", 3),
            kg_k=data.get("kg_k", 3),
            min_class_fraction=data.get("min_class_fraction", 0.001),
        )


@dataclass
class ClassificationRequest:
    description: str
    weight: float | None = None
    value: float | None = None
    k: int = 3
    mode: str | None = None  # None: engine default
    source_weights: dict[str, float] | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be at least 1")


@dataclass
class CandidateCode:
    code: str
    source: str
    score: float
    rank: int

    def to_dict(self) -> dict:
        return {"code": self.code, "source": self.source, "score": self.score, "rank": self.rank}


@dataclass
class AuditTrail:
    request: dict
    cleaned_text: str
    pipeline: str  # hierarchical | flat
    candidates: list[CandidateCode]
    created_at: str
    fingerprints: dict[str, str]
    hs2: dict | None = None
    hs4: dict | None = None
    knn: list[dict] = field(default_factory=list)
    kg: list[dict] = field(default_factory=list)
    flat: dict | None = None

    def to_dict(self) -> dict:
        return {
            "request": self.request,
            "cleaned_text": self.cleaned_text,
            "pipeline": self.pipeline,
            "hs2": self.hs2,
            "hs4": self.hs4,
            "knn": self.knn,
            "kg": self.kg,
            "flat": self.flat,
            "candidates": [c.to_dict() for c in self.candidates],
            "created_at": self.created_at,
            "fingerprints": self.fingerprints,
        }


# ---------------------------------------------------------------------------
# Nearest-neighbor index over training descriptions
# ---------------------------------------------------------------------------


@dataclass
class KnnIndex:
    """One unit vector per unique cleaned training description."""

    codes: list[str]
    texts: list[str]
    vectors: np.ndarray  # N x d, unit rows

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float64)
        if self.vectors.ndim != 2 or self.vectors.shape[0] != len(self.codes):
            raise BundleFormatError("index rows disagree with code list")
        self._by_heading: dict[str, list[int]] = {}
        for i, code in enumerate(self.codes):
            self._by_heading.setdefault(code[:4], []).append(i)

    def __len__(self) -> int:
        return len(self.codes)

    def search(self, query: Embedding, heading: str, k: int) -> list[dict]:
        rows = self._by_heading.get(heading, [])
        if not rows:
            return []
        q = query.values / query.norm
        sims = self.vectors[rows] @ q
        scored = sorted(
            (
                {"code": self.codes[i], "text": self.texts[i], "similarity": float(s)}
                for i, s in zip(rows, sims)
            ),
            key=lambda hit: (-hit["similarity"], hit["code"], hit["text"]),
        )
        return scored[:k]


# ---------------------------------------------------------------------------
# Engine state
# ---------------------------------------------------------------------------


@dataclass
class Engine:
    schedule: TariffSchedule
    config: EngineConfig
    lexicon: Lexicon
    numeric_stats: NumericStats
    rules: ExtractionRuleSet
    hs2_model: SoftmaxModel
    hs4_models: dict[str, object]
    hs4_joint: SoftmaxModel
    flat_model: SoftmaxModel
    flat_others: dict[str, str]
    knn: KnnIndex
    graphs: dict[str, KnowledgeGraph]
    constant_branches: list[str] = field(default_factory=list)
    fingerprint: str = ""

    def __post_init__(self):
        self.embedder = make_embedder(self.config.embedder)
        if not self.fingerprint:
            self.fingerprint = _fingerprint_parts(_serialize_parts(self))


def _feature_vector(embedding: Embedding, weight_z: float, value_z: float) -> np.ndarray:
    return np.concatenate([embedding.values, [weight_z, value_z]])


# ---------------------------------------------------------------------------
# Build
# ---------------------------------------------------------------------------


def build_engine(
    schedule: TariffSchedule,
    dataset: Dataset,
    lexicon: Lexicon,
    config: EngineConfig | None = None,
    rules: ExtractionRuleSet | None = None,
) -> Engine:
    """Train every model, index the training set, and build the graph store."""
    config = config or EngineConfig()
    rules = rules or ExtractionRuleSet.default()
    if not dataset.records:
        raise DatasetFormatError("cannot build an engine from an empty dataset")

    labels: list[str] = []
    for record in dataset.records:
        code = HsCode.parse(record.hs_code)
        if code.level < Level.SUBHEADING:
            raise DatasetFormatError(
                f"training code {record.hs_code} is above subheading level"
            )
        labels.append(code.digits[:6])

    embedder = make_embedder(config.embedder)
    memo: dict[str, Embedding] = {}
    for record in dataset.records:
        if record.text not in memo:
            memo[record.text] = embedder.embed(record.text)
    features = np.stack(
        [
            _feature_vector(memo[r.text], r.weight_z, r.value_z)
            for r in dataset.records
        ]
    )

    chapters = [lbl[:2] for lbl in labels]
    headings = [lbl[:4] for lbl in labels]
    hs2_model = train(features, chapters, config.train, level=2)

    hs4_models: dict[str, object] = {}
    constant_branches: list[str] = []
    for chapter in sorted(set(chapters)):
        idx = [i for i, c in enumerate(chapters) if c == chapter]
        branch_headings = [headings[i] for i in idx]
        if len(set(branch_headings)) < 2:
            hs4_models[chapter] = ConstantModel(
                label=branch_headings[0], level=4, parent=chapter
            )
            constant_branches.append(chapter)
            continue
        hs4_models[chapter] = train(
            features[idx], branch_headings, config.train, level=4, parent=chapter
        )

    hs4_joint = train(features, headings, config.train, level=4)

    flat_dataset = group_low_frequency(
        replace(dataset, records=[replace(r, hs_code=lbl) for r, lbl in zip(dataset.records, labels)]),
        config.min_class_fraction,
    )
    flat_model = train(
        features, [r.hs_code for r in flat_dataset.records], config.train, level=6
    )

    # dedupe by cleaned text; after the majority rule each text has one code
    seen: dict[str, int] = {}
    knn_codes: list[str] = []
    knn_texts: list[str] = []
    knn_rows: list[np.ndarray] = []
    for record, label in zip(dataset.records, labels):
        if record.text in seen:
            continue
        seen[record.text] = len(knn_codes)
        knn_codes.append(label)
        knn_texts.append(record.text)
        emb = memo[record.text]
        knn_rows.append(emb.values / emb.norm)
    knn = KnnIndex(codes=knn_codes, texts=knn_texts, vectors=np.stack(knn_rows))

    graphs: dict[str, KnowledgeGraph] = {}
    heading_codes = sorted({k[:4] for k in schedule.index if len(k) >= 4})
    for heading in heading_codes:
        for code, composed in codes_under(schedule, HsCode(heading), Level.SUBHEADING):
            own = describe(schedule, code)
            try:
                graphs[code.digits] = build_graph(code.digits, own, embedder, rules)
            except NoEntitiesError:
                # bare "Other" style lines need their heading context
                graphs[code.digits] = build_graph(code.digits, composed, embedder, rules)

    return Engine(
        schedule=schedule,
        config=config,
        lexicon=lexicon,
        numeric_stats=dataset.numeric_stats,
        rules=rules,
        hs2_model=hs2_model,
        hs4_models=hs4_models,
        hs4_joint=hs4_joint,
        flat_model=flat_model,
        flat_others=dict(flat_dataset.others_map),
        knn=knn,
        graphs=graphs,
        constant_branches=constant_branches,
    )


# ---------------------------------------------------------------------------
# Classification
# ---------------------------------------------------------------------------


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _prepare_input(request: ClassificationRequest, engine: Engine):
    record = clean_for_inference(
        request.description,
        engine.lexicon,
        engine.numeric_stats,
        weight=request.weight,
        value=request.value,
    )
    if not record.tokens:
        raise EmptyAfterCleaningError(
            f"description {request.description!r} is empty after cleaning"
        )
    embedding = engine.embedder.embed(record.text)
    if embedding.is_zero:
        # cosine is undefined against a zero vector, so nothing downstream works
        raise EmptyAfterCleaningError(
            f"description {request.description!r} embeds to the zero vector"
        )
    x = _feature_vector(embedding, record.weight_z, record.value_z)
    return record, embedding, x


def _merge_candidates(
    knn_hits: list[dict],
    kg_results,
    source_weights: dict[str, float] | None,
    k: int,
) -> list[CandidateCode]:
    weights = {KG_SOURCE: 1.0, KNN_SOURCE: 1.0}
    weights.update(source_weights or {})
    pool: dict[str, tuple[float, int, str]] = {}

    def offer(code: str, source: str, raw_score: float):
        weighted = raw_score * weights.get(source, 1.0)
        priority = 0 if source == KG_SOURCE else 1  # graph evidence wins ties
        entry = (weighted, priority, source)
        best = pool.get(code)
        if best is None or (-entry[0], entry[1]) < (-best[0], best[1]):
            pool[code] = entry

    for result in kg_results:
        offer(result.code, KG_SOURCE, result.average_similarity)
    for hit in knn_hits:
        offer(hit["code"], KNN_SOURCE, hit["similarity"])

    ordered = sorted(pool.items(), key=lambda kv: (-kv[1][0], kv[1][1], kv[0]))
    return [
        CandidateCode(code=code, source=source, score=score, rank=rank)
        for rank, (code, (score, _, source)) in enumerate(ordered[:k], start=1)
    ]


def classify(
    request: ClassificationRequest,
    engine: Engine | None,
    now: str | None = None,
) -> tuple[list[CandidateCode], AuditTrail]:
    """Three-step hierarchical pipeline with dual 6-digit evidence."""
    if engine is None:
        raise NotTrainedError("no engine loaded")
    record, embedding, x = _prepare_input(request, engine)
    mode = request.mode or engine.config.mode
    prediction = hierarchical_predict(
        x, engine.hs2_model, engine.hs4_models, mode=mode, hs4_joint=engine.hs4_joint
    )
    m_star = prediction.heading

    try:
        pairs = codes_under(engine.schedule, HsCode(m_star), Level.SUBHEADING)
    except UnknownCodeError:
        raise UnknownHeadingError(
            f"heading {m_star} predicted by the model is not in the schedule"
        ) from None

    knn_hits = engine.knn.search(embedding, m_star, k=engine.config.knn_k)
    kg_graphs = [
        engine.graphs[code.digits] for code, _ in pairs if code.digits in engine.graphs
    ]
    kg_results = (
        rank_top_k(embedding, kg_graphs, k=engine.config.kg_k) if kg_graphs else []
    )
    candidates = _merge_candidates(knn_hits, kg_results, request.source_weights, request.k)
    if not candidates:
        raise UnknownHeadingError(
            f"no 6-digit classes found under heading {m_star}"
        )

    trail = AuditTrail(
        request={
            "description": request.description,
            "weight": request.weight,
            "value": request.value,
            "k": request.k,
            "mode": mode,
            "source_weights": request.source_weights,
        },
        cleaned_text=record.text,
        pipeline="hierarchical",
        hs2={"probs": prediction.chapter_dist.probs, "chosen": prediction.chapter},
        hs4={
            "probs": prediction.heading_dist.probs,
            "chosen": m_star,
            "mode": mode,
            "constant_branch": isinstance(
                engine.hs4_models.get(prediction.chapter), ConstantModel
            ),
        },
        knn=knn_hits,
        kg=[
            {
                "code": r.code,
                "average_similarity": r.average_similarity,
                "elements": [
                    {"id": eid, "similarity": sim, "color": bucket.value}
                    for eid, sim, bucket in r.per_element
                ],
            }
            for r in kg_results
        ],
        candidates=candidates,
        created_at=now or _utc_now(),
        fingerprints={
            "engine": engine.fingerprint,
            "embedder": engine.config.embedder.fingerprint(),
        },
    )
    return candidates, trail


def flat_classify(
    request: ClassificationRequest,
    engine: Engine | None,
    now: str | None = None,
) -> tuple[list[CandidateCode], AuditTrail]:
    """Single softmax over all 6-digit classes; OTHERS argmax = unassignable."""
    if engine is None:
        raise NotTrainedError("no engine loaded")
    record, _, x = _prepare_input(request, engine)
    dist = predict_proba(engine.flat_model, x)
    chosen, top_p = argmax_class(dist)
    unassignable = chosen == OTHERS

    ranked = [
        CandidateCode(code=code, source=FLAT_SOURCE, score=prob, rank=rank)
        for rank, (code, prob) in enumerate(
            (kv for kv in dist.top(len(dist.probs)) if kv[0] != OTHERS), start=1
        )
    ][: request.k]

    trail = AuditTrail(
        request={
            "description": request.description,
            "weight": request.weight,
            "value": request.value,
            "k": request.k,
        },
        cleaned_text=record.text,
        pipeline="flat",
        flat={
            "probs": dist.probs,
            "chosen": chosen,
            "probability": top_p,
            "unassignable": unassignable,
        },
        candidates=ranked,
        created_at=now or _utc_now(),
        fingerprints={
            "engine": engine.fingerprint,
            "embedder": engine.config.embedder.fingerprint(),
        },
    )
    return ranked, trail


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


@dataclass
class EvaluationReport:
    rows: int
    skipped_empty: int
    hierarchical: dict[str, float]
    flat: dict[str, float]

    def to_dict(self) -> dict:
        return {
            "rows": self.rows,
            "skipped_empty": self.skipped_empty,
            "hierarchical": self.hierarchical,
            "flat": self.flat,
        }


def evaluate(test_records, engine: Engine) -> EvaluationReport:
    """Score both pipelines on one labeled split."""
    if not test_records:
        raise EmptyTestSetError("test set is empty")

    counts = {
        "n": 0,
        "hier1": 0,
        "hier3": 0,
        "hier_covered": 0,
        "hs2": 0,
        "hs4": 0,
        "flat1": 0,
        "flat3": 0,
        "others": 0,
    }
    skipped = 0
    for raw in test_records:
        true = HsCode.parse(raw.hs_code).digits[:6]
        request = ClassificationRequest(
            description=raw.description, weight=raw.weight, value=raw.value
        )
        try:
            candidates, trail = classify(request, engine)
        except EmptyAfterCleaningError:
            skipped += 1
            continue
        counts["n"] += 1
        top_codes = [c.code for c in candidates[:3]]
        counts["hier_covered"] += bool(candidates) and candidates[0].code != OTHERS
        counts["hier1"] += bool(top_codes) and top_codes[0] == true
        counts["hier3"] += true in top_codes
        counts["hs2"] += trail.hs2["chosen"] == true[:2]
        counts["hs4"] += trail.hs4["chosen"] == true[:4]

        flat_candidates, flat_trail = flat_classify(request, engine)
        if flat_trail.flat["unassignable"]:
            counts["others"] += 1
        else:
            flat_top = [c.code for c in flat_candidates[:3]]
            counts["flat1"] += bool(flat_top) and flat_top[0] == true
            counts["flat3"] += true in flat_top

    n = counts["n"]
    if n == 0:
        raise EmptyTestSetError("every test row cleaned to empty text")

    return EvaluationReport(
        rows=n,
        skipped_empty=skipped,
        hierarchical={
            "accuracy_at_1": counts["hier1"] / n,
            "accuracy_at_3": counts["hier3"] / n,
            "coverage": counts["hier_covered"] / n,
            "hs2_accuracy": counts["hs2"] / n,
            "hs4_accuracy": counts["hs4"] / n,
        },
        flat={
            "accuracy_at_1": counts["flat1"] / n,
            "accuracy_at_3": counts["flat3"] / n,
            "others_rate": counts["others"] / n,
            "coverage": 1.0 - counts["others"] / n,
        },
    )


# ---------------------------------------------------------------------------
# Bundle persistence
# ---------------------------------------------------------------------------

_BUNDLE_VERSION = 1


def _canonical_json(data) -> bytes:
    return (json.dumps(data, indent=2, sort_keys=True) + "\n").encode("utf-8")


def _serialize_parts(engine: Engine) -> dict[str, bytes]:
    """Every content file of the bundle, path -> bytes, fully deterministic."""
    parts: dict[str, bytes] = {
        "schedule.json": engine.schedule.to_json().encode("utf-8"),
        "config.json": _canonical_json(engine.config.to_dict()),
        "rules.json": _canonical_json(engine.rules.to_dict()),
        "preprocess.json": _canonical_json(
            {
                "lexicon": engine.lexicon.to_dict(),
                "numeric_stats": engine.numeric_stats.to_dict(),
                "flat_others": engine.flat_others,
                "constant_branches": engine.constant_branches,
            }
        ),
        "knn/index.json": _canonical_json(
            {
                "codes": engine.knn.codes,
                "texts": engine.knn.texts,
                "dimension": int(engine.knn.vectors.shape[1]),
            }
        ),
        "knn/vectors.f64": np.ascontiguousarray(
            engine.knn.vectors, dtype="<f8"
        ).tobytes(),
    }
    for name, model in [
        ("hs2", engine.hs2_model),
        ("hs4_joint", engine.hs4_joint),
        ("flat", engine.flat_model),
    ]:
        for filename, blob in model_to_parts(model, name).items():
            parts[f"models/{filename}"] = blob
    for chapter, model in sorted(engine.hs4_models.items()):
        for filename, blob in model_to_parts(model, f"hs4_{chapter}").items():
            parts[f"models/{filename}"] = blob
    for code, graph in sorted(engine.graphs.items()):
        parts[f"kg/{code}.json"] = graph.to_json().encode("utf-8")
    return parts


def _fingerprint_parts(parts: dict[str, bytes]) -> str:
    digest = hashlib.sha256()
    for path in sorted(parts):
        digest.update(path.encode("utf-8"))
        digest.update(b"\0")
        digest.update(hashlib.sha256(parts[path]).digest())
    return digest.hexdigest()


def save_engine(engine: Engine, directory: Path, now: str | None = None) -> Path:
    """Write the bundle and its manifest; returns the manifest path.

    ``now`` (or SOURCE_DATE_EPOCH) pins the created-at stamp so archived
    bundles can be reproduced byte for byte.
    """
    directory = Path(directory)
    parts = _serialize_parts(engine)
    for rel, blob in parts.items():
        target = directory / rel
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(blob)

    if now is None:
        epoch = os.environ.get("SOURCE_DATE_EPOCH")
        if epoch is not None:
            now = datetime.fromtimestamp(int(epoch), tz=timezone.utc).isoformat(
                timespec="seconds"
            )
        else:
            now = _utc_now()

    manifest = {
        "format_version": _BUNDLE_VERSION,
        "package_version": __version__,
        "created_at": now,
        "engine_fingerprint": _fingerprint_parts(parts),
        "files": {rel: hashlib.sha256(blob).hexdigest() for rel, blob in parts.items()},
    }
    manifest_path = directory / "manifest.json"
    manifest_path.write_bytes(_canonical_json(manifest))
    return manifest_path


def load_engine(directory: Path) -> Engine:
    """Read a bundle back, verifying every content hash."""
    directory = Path(directory)
    manifest_path = directory / "manifest.json"
    if not manifest_path.exists():
        raise NotTrainedError(f"no engine bundle at {directory}")
    try:
        manifest = json.loads(manifest_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise BundleFormatError(f"manifest is not valid JSON: {exc}") from None
    if manifest.get("format_version") != _BUNDLE_VERSION:
        raise BundleFormatError(
            f"unsupported bundle version {manifest.get('format_version')}"
        )

    parts: dict[str, bytes] = {}
    for rel, expected in manifest["files"].items():
        path = directory / rel
        if not path.exists():
            raise BundleFormatError(f"bundle file {rel} is missing")
        blob = path.read_bytes()
        if hashlib.sha256(blob).hexdigest() != expected:
            raise BundleFormatError(f"bundle file {rel} fails its content hash")
        parts[rel] = blob

    schedule = TariffSchedule.from_json(parts["schedule.json"].decode("utf-8"))
    config = EngineConfig.from_dict(json.loads(parts["config.json"]))
    rules = ExtractionRuleSet.from_dict(json.loads(parts["rules.json"]))
    pre = json.loads(parts["preprocess.json"])
    lexicon = Lexicon.from_dict(pre["lexicon"])
    stats = NumericStats.from_dict(pre["numeric_stats"])

    model_parts = {
        rel.removeprefix("models/"): blob
        for rel, blob in parts.items()
        if rel.startswith("models/")
    }
    hs2_model = model_from_parts(model_parts, "hs2")
    hs4_joint = model_from_parts(model_parts, "hs4_joint")
    flat_model = model_from_parts(model_parts, "flat")
    hs4_models = {}
    for filename in model_parts:
        if filename.startswith("hs4_") and filename.endswith(".json"):
            name = filename.removesuffix(".json")
            if name == "hs4_joint":
                continue
            hs4_models[name.removeprefix("hs4_")] = model_from_parts(model_parts, name)

    index_meta = json.loads(parts["knn/index.json"])
    vectors = np.frombuffer(parts["knn/vectors.f64"], dtype="<f8").reshape(
        len(index_meta["codes"]), index_meta["dimension"]
    )
    knn = KnnIndex(
        codes=index_meta["codes"], texts=index_meta["texts"], vectors=vectors.copy()
    )

    graphs = {
        rel.removeprefix("kg/").removesuffix(".json"): KnowledgeGraph.from_json(
            blob.decode("utf-8")
        )
        for rel, blob in parts.items()
        if rel.startswith("kg/")
    }

    return Engine(
        schedule=schedule,
        config=config,
        lexicon=lexicon,
        numeric_stats=stats,
        rules=rules,
        hs2_model=hs2_model,
        hs4_models=hs4_models,
        hs4_joint=hs4_joint,
        flat_model=flat_model,
        flat_others=pre.get("flat_others", {}),
        knn=knn,
        graphs=graphs,
        constant_branches=pre.get("constant_branches", []),
        fingerprint=manifest["engine_fingerprint"],
    )

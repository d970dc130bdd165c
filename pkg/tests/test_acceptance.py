"""Acceptance gate: the ten load-bearing behaviors, one pass/fail line each.

Run with ``pytest tests/test_acceptance.py -v -s`` to see every line even on
success.  Each check is self-contained (own data generators and oracles) and
asserts its runtime budget.
"""

from __future__ import annotations

import json
import math
import random
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from hsclassify.classify import (
    SoftmaxModel,
    TrainConfig,
    conditional_proba,
    loss_and_gradient,
    predict_proba,
)
from hsclassify.embed import EmbedderConfig, Embedding
from hsclassify.ensemble import (
    ClassificationRequest,
    EngineConfig,
    build_engine,
    classify,
    evaluate,
    save_engine,
)
from hsclassify.kgraph import GraphEdge, GraphNode, KnowledgeGraph, rank_top_k, score
from hsclassify.nomenclature import HsCode, Level, codes_under, load_schedule, parse_schedule
from hsclassify.preprocess import (
    CleanRecord,
    RawRecord,
    load_records,
    prepare_dataset,
    resolve_ambiguous,
)

FIXTURES = Path(__file__).parent / "fixtures"


@contextmanager
def criterion(number: int, label: str, budget_seconds: float | None = None):
    started = time.perf_counter()
    try:
        yield
    except BaseException:
        print(f"[FAIL] {number:02d} {label}", flush=True)
        raise
    elapsed = time.perf_counter() - started
    if budget_seconds is not None and elapsed > budget_seconds:
        print(f"[FAIL] {number:02d} {label} (took {elapsed:.1f}s > {budget_seconds:.0f}s)", flush=True)
        pytest.fail(f"{label}: {elapsed:.1f}s exceeded the {budget_seconds:.0f}s budget")
    print(f"[PASS] {number:02d} {label} ({elapsed:.2f}s)", flush=True)


# ---------------------------------------------------------------------------
# Shared synthetic-data helpers
# ---------------------------------------------------------------------------


def vocab_for(code: str, words: int = 6) -> list[str]:
    return [f"item{code}x{i}" for i in range(words)]


def schedule_for(tree: dict[str, dict[str, list[str]]]) -> str:
    lines = []
    for chapter, headings in sorted(tree.items()):
        lines.append(f"{chapter}\tGoods of chapter {chapter}")
        for heading, subs in sorted(headings.items()):
            lines.append(f"{heading}\tArticles of heading {heading}")
            for sub in subs:
                words = vocab_for(sub)
                desc = f"Articles containing {words[0]}, {words[1]} and {words[2]}"
                lines.append(f"{sub[:4]}.{sub[4:]}.00\t00 {desc}")
    return "\n".join(lines) + "\n"


def sample_rows(codes: list[str], rows_per_class: int, seed: int) -> list[RawRecord]:
    rng = random.Random(seed)
    rows = []
    for code in codes:
        words = vocab_for(code)
        for _ in range(rows_per_class):
            text = " ".join(rng.choices(words, k=4))
            rows.append(
                RawRecord(
                    description=text,
                    hs_code=code,
                    weight=rng.uniform(1.0, 40.0),
                    value=rng.uniform(20.0, 800.0),
                )
            )
    return rows


def random_model(rng: np.random.Generator, classes: list[str], dim: int, level: int) -> SoftmaxModel:
    weights = rng.normal(scale=0.8, size=(len(classes), dim + 1))
    return SoftmaxModel(weights=weights, classes=classes, level=level)


# ---------------------------------------------------------------------------
# 1. Worked bearings example: graph evidence outranks the mislabeled code
# ---------------------------------------------------------------------------


def test_criterion_01_bearings_graph_ranking():
    with criterion(1, "bearings KG ranking (848250/848251 above 848291)", budget_seconds=5.0):
        schedule = load_schedule((FIXTURES / "schedule_bearings.txt").read_text())
        rows = load_records((FIXTURES / "bearings_train.csv").read_text())
        dataset, lexicon = prepare_dataset(rows)
        engine = build_engine(schedule, dataset, lexicon)  # defaults throughout

        request = ClassificationRequest(description="package stc conical roller bearings")
        _, trail = classify(request, engine)
        assert trail.hs4["chosen"] == "8482"
        ranked = [entry["code"] for entry in trail.kg]
        below = ranked.index("848291") if "848291" in ranked else len(ranked)
        assert ranked.index("848250") < below
        assert ranked.index("848251") < below

        # Same claim over the complete ordering, not just the served top-k.
        query = engine.embedder.embed(trail.cleaned_text)
        full = [m.code for m in rank_top_k(query, list(engine.graphs.values()), k=len(engine.graphs))]
        assert full.index("848250") < full.index("848291")
        assert full.index("848251") < full.index("848291")


# ---------------------------------------------------------------------------
# 2. Every predicted distribution is a distribution
# ---------------------------------------------------------------------------


def test_criterion_02_probability_normalization():
    with criterion(2, "1000 random predicts all sum to 1 +- 1e-9", budget_seconds=10.0):
        rng = np.random.default_rng(2024)
        for _ in range(1000):
            k = int(rng.integers(2, 51))
            dim = int(rng.integers(8, 65))
            classes = [f"{100001 + i:06d}" for i in range(k)]
            model = random_model(rng, classes, dim, level=6)
            x = rng.normal(size=dim)
            dist = predict_proba(model, x)
            total = sum(dist.probs.values())
            assert abs(total - 1.0) <= 1e-9
            assert all(0.0 <= p <= 1.0 for p in dist.probs.values())


# ---------------------------------------------------------------------------
# 3. Analytic gradient against central finite differences
# ---------------------------------------------------------------------------


def test_criterion_03_gradient_oracle():
    with criterion(3, "analytic gradient vs central differences <= 1e-4", budget_seconds=10.0):
        rng = np.random.default_rng(7)
        h = 1e-5
        for _ in range(20):
            k = int(rng.integers(2, 9))
            dim = int(rng.integers(4, 13))
            n = int(rng.integers(5, 41))
            l2 = float(rng.choice([0.0, 1e-4, 1e-2]))
            weights = rng.normal(scale=0.5, size=(k, dim + 1))
            features = rng.normal(size=(n, dim))
            label_idx = rng.integers(0, k, size=n)

            _, grad = loss_and_gradient(weights, features, label_idx, l2)
            fd = np.zeros_like(weights)
            for i in range(k):
                for j in range(dim + 1):
                    wp, wm = weights.copy(), weights.copy()
                    wp[i, j] += h
                    wm[i, j] -= h
                    lp, _ = loss_and_gradient(wp, features, label_idx, l2)
                    lm, _ = loss_and_gradient(wm, features, label_idx, l2)
                    fd[i, j] = (lp - lm) / (2 * h)
            rel_err = np.linalg.norm(fd - grad) / np.linalg.norm(grad)
            assert rel_err <= 1e-4


# ---------------------------------------------------------------------------
# 4. Conditional composition equals restricted renormalization
# ---------------------------------------------------------------------------


def test_criterion_04_conditional_consistency():
    with criterion(4, "conditional composition == restricted renormalization (1e-12)"):
        rng = np.random.default_rng(11)
        dim = 12
        chapters = ["10", "20", "30"]
        headings = ["1001", "1002", "1003", "2001", "2002", "3001", "3002", "3003"]
        hs2 = random_model(rng, chapters, dim, level=2)
        joint = random_model(rng, headings, dim, level=4)

        for _ in range(100):
            x = rng.normal(size=dim)
            p2 = predict_proba(hs2, x)
            p4 = predict_proba(joint, x)
            l_star = max(p2.probs, key=lambda c: (p2.probs[c], c))

            composed = conditional_proba(p4, p2, l_star)
            restricted = {m: p for m, p in p4.probs.items() if m.startswith(l_star)}
            total = sum(restricted.values())
            assert set(composed.probs) == set(restricted)
            for m, p in restricted.items():
                assert abs(composed.probs[m] - p / total) <= 1e-12


# ---------------------------------------------------------------------------
# 5. Thin classes: flat leaves gaps, hierarchical covers everything
# ---------------------------------------------------------------------------


def test_criterion_05_coverage_property():
    with criterion(5, "flat others-rate > 0 while hierarchical coverage == 1.0", budget_seconds=120.0):
        tree = {
            "01": {"0101": ["010110", "010120"], "0102": ["010210", "010220", "010230"]},
            "02": {"0201": ["020110", "020120"], "0202": ["020210", "020220", "020230"]},
        }
        thin = ["010230", "020230", "020220"]  # 3 of 10 classes (30%)
        main = [
            sub
            for headings in tree.values()
            for subs in headings.values()
            for sub in subs
            if sub not in thin
        ]
        rows = sample_rows(main, rows_per_class=30, seed=5) + sample_rows(thin, rows_per_class=2, seed=55)
        dataset, lexicon = prepare_dataset(rows)
        schedule = load_schedule(schedule_for(tree))
        config = EngineConfig(
            embedder=EmbedderConfig(dimension=64),
            train=TrainConfig(epochs=300, learning_rate=1.0),
            min_class_fraction=0.05,  # thin classes sit at ~0.9% each
        )
        engine = build_engine(schedule, dataset, lexicon, config)
        assert sorted(engine.flat_others) == sorted(thin)

        test_rows = sample_rows(thin, rows_per_class=3, seed=99)
        report = evaluate(test_rows, engine)
        assert report.flat["others_rate"] > 0
        assert report.hierarchical["coverage"] == 1.0


# ---------------------------------------------------------------------------
# 6. Hierarchy at least matches the flat baseline on separable data
# ---------------------------------------------------------------------------


def test_criterion_06_direction_of_improvement():
    with criterion(6, "hierarchical acc@1 >= flat acc@1, both >= 0.90", budget_seconds=300.0):
        tree: dict[str, dict[str, list[str]]] = {}
        for c in range(1, 11):
            chapter = f"{c:02d}"
            tree[chapter] = {
                f"{chapter}{h:02d}": [f"{chapter}{h:02d}{s}0" for s in (1, 2, 3)]
                for h in range(1, 5)
            }
        codes = [sub for headings in tree.values() for subs in headings.values() for sub in subs]
        assert len(codes) == 120

        dataset, lexicon = prepare_dataset(sample_rows(codes, rows_per_class=50, seed=6))
        schedule = load_schedule(schedule_for(tree))
        config = EngineConfig(
            embedder=EmbedderConfig(dimension=128),
            train=TrainConfig(epochs=150, learning_rate=1.0),
        )
        engine = build_engine(schedule, dataset, lexicon, config)

        report = evaluate(sample_rows(codes, rows_per_class=2, seed=66), engine)
        hier, flat = report.hierarchical["accuracy_at_1"], report.flat["accuracy_at_1"]
        assert hier >= flat
        assert hier >= 0.90
        assert flat >= 0.90


# ---------------------------------------------------------------------------
# 7. The strict-majority rule on ambiguous descriptions
# ---------------------------------------------------------------------------


def test_criterion_07_majority_rule():
    with criterion(7, "80% rule: 9:1 keep, 4:4 drop, 81:19 keep, 80:20 drop"):
        def records(text: str, split: dict[str, int]) -> list[CleanRecord]:
            return [
                CleanRecord(tokens=tuple(text.split()), hs_code=code)
                for code, count in split.items()
                for _ in range(count)
            ]

        nine_one = resolve_ambiguous(records("steel bolts", {"731815": 9, "731816": 1}))
        assert len(nine_one) == 9 and {r.hs_code for r in nine_one} == {"731815"}

        four_four = resolve_ambiguous(records("steel bolts", {"731815": 4, "731816": 4}))
        assert four_four == []

        eighty_one = resolve_ambiguous(records("steel bolts", {"731815": 81, "731816": 19}))
        assert len(eighty_one) == 81 and {r.hs_code for r in eighty_one} == {"731815"}

        eighty = resolve_ambiguous(records("steel bolts", {"731815": 80, "731816": 20}))
        assert eighty == []


# ---------------------------------------------------------------------------
# 8. Nomenclature parsing of the pump-heading text
# ---------------------------------------------------------------------------


def test_criterion_08_schedule_parser():
    with criterion(8, "heading 8414 parse: subheadings and statistical lines"):
        schedule = parse_schedule((FIXTURES / "schedule_8414.txt").read_text())
        pairs = codes_under(schedule, HsCode("8414"), Level.SUBHEADING)
        found = {code.digits for code, _ in pairs}
        assert found == {"841410", "841420", "841430", "841440"}

        node = schedule.lookup("84143080")
        suffixes = set()

        def collect(n):
            for child in n.children:
                if child.statistical_suffix:
                    suffixes.add(child.statistical_suffix)
                collect(child)

        collect(node)
        assert {"10", "20", "50", "60", "70", "80", "90"} <= suffixes


# ---------------------------------------------------------------------------
# 9. Average-cosine scoring against a serialized-elements oracle
# ---------------------------------------------------------------------------


def test_criterion_09_average_cosine_oracle():
    with criterion(9, "graph score == brute-force mean over serialized elements (1e-12)"):
        rng = np.random.default_rng(9)

        def random_vec(dim: int) -> np.ndarray:
            v = rng.normal(size=dim)
            return v / np.linalg.norm(v)

        for round_no in range(100):
            dim = int(rng.integers(4, 17))
            n_nodes = int(rng.integers(1, 6))
            n_edges = int(rng.integers(0, n_nodes))
            nodes = [
                GraphNode(f"n{i}", f"node {i}", Embedding(random_vec(dim)))
                for i in range(n_nodes)
            ]
            edges = [
                GraphEdge(f"e{i}", f"n{i}", f"n{(i + 1) % n_nodes}", f"edge {i}", Embedding(random_vec(dim)))
                for i in range(n_edges)
            ]
            graph = KnowledgeGraph(code="848250", description="synthetic", nodes=nodes, edges=edges)
            query = Embedding(random_vec(dim))

            result = score(query, graph)

            serialized = json.loads(graph.to_json())
            sims = []
            for element in serialized["nodes"] + serialized["edges"]:
                vec = element["vector"]
                dot = sum(a * b for a, b in zip(query.values.tolist(), vec))
                norm = math.sqrt(sum(v * v for v in vec))
                qnorm = math.sqrt(sum(v * v for v in query.values.tolist()))
                sims.append(dot / (norm * qnorm))
            expected = sum(sims) / len(sims)
            assert abs(result.average_similarity - expected) <= 1e-12


# ---------------------------------------------------------------------------
# 10. Seeded rebuilds produce byte-identical bundles
# ---------------------------------------------------------------------------


def test_criterion_10_deterministic_manifests(tmp_path, monkeypatch):
    with criterion(10, "fixed-seed rebuild: byte-identical manifests"):
        monkeypatch.setenv("SOURCE_DATE_EPOCH", "1700000000")
        schedule_text = (FIXTURES / "schedule_bearings.txt").read_text()
        data_text = (FIXTURES / "bearings_train.csv").read_text()
        config = EngineConfig(
            embedder=EmbedderConfig(dimension=64, seed=3),
            train=TrainConfig(epochs=40, seed=3),
            min_class_fraction=0.0,
        )

        manifests = []
        for run in ("first", "second"):
            dataset, lexicon = prepare_dataset(load_records(data_text))
            engine = build_engine(load_schedule(schedule_text), dataset, lexicon, config)
            out = tmp_path / run
            save_engine(engine, out)
            manifests.append((out / "manifest.json").read_bytes())

        assert manifests[0] == manifests[1]
        files = json.loads(manifests[0])["files"]
        for rel in files:
            assert (tmp_path / "first" / rel).read_bytes() == (tmp_path / "second" / rel).read_bytes()

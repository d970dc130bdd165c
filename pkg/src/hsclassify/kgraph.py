"""Per-code knowledge graphs and average-cosine query matching.

Each 6-digit description is turned into a small graph: noun-bearing entities
become nodes, the phrases between them become directed edges.  A query is
scored against a graph by embedding the query once and averaging its cosine
similarity over ALL elements, nodes and edges alike; the per-element cosines
are bucketed into match colors (green, light green, yellow, blue) for the
annotated Graphviz rendering used in review tooling.

Graphs are built once at ingest time and persisted with their vectors, so
query scoring never re-runs extraction or embedding of schedule text.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from .embed import Embedding, EmptyEmbeddingError, cosine
from .errors import HsClassifyError
from .extract import ExtractionRuleSet, extract_text


class MatchGraphMismatchError(HsClassifyError):
    code = "MatchGraphMismatch"


class GraphFormatError(HsClassifyError):
    code = "GraphFormat"


# ---------------------------------------------------------------------------
# Graph structure
# ---------------------------------------------------------------------------


@dataclass
class GraphNode:
    id: str
    text: str
    embedding: Embedding


@dataclass
class GraphEdge:
    id: str
    source: str
    target: str
    text: str
    embedding: Embedding


@dataclass
class KnowledgeGraph:
    code: str
    description: str
    nodes: list[GraphNode]
    edges: list[GraphEdge] = field(default_factory=list)
    embedder_fingerprint: str = ""

    def __post_init__(self):
        if not self.nodes:
            raise GraphFormatError(f"graph for {self.code} has no nodes")
        node_ids = {n.id for n in self.nodes}
        for edge in self.edges:
            if edge.source not in node_ids or edge.target not in node_ids:
                raise GraphFormatError(
                    f"edge {edge.id} of {self.code} references a missing node"
                )

    @property
    def size(self) -> int:
        return len(self.nodes) + len(self.edges)

    def elements(self) -> list[tuple[str, str, Embedding]]:
        """(id, text, embedding) for every node then every edge, in order."""
        out = [(n.id, n.text, n.embedding) for n in self.nodes]
        out.extend((e.id, e.text, e.embedding) for e in self.edges)
        return out

    def to_dict(self) -> dict:
        return {
            "code": self.code,
            "description": self.description,
            "embedder_fingerprint": self.embedder_fingerprint,
            "nodes": [
                {"id": n.id, "text": n.text, "vector": n.embedding.values.tolist()}
                for n in self.nodes
            ],
            "edges": [
                {
                    "id": e.id,
                    "source": e.source,
                    "target": e.target,
                    "text": e.text,
                    "vector": e.embedding.values.tolist(),
                }
                for e in self.edges
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "KnowledgeGraph":
        try:
            nodes = [
                GraphNode(n["id"], n["text"], Embedding(np.array(n["vector"])))
                for n in data["nodes"]
            ]
            edges = [
                GraphEdge(
                    e["id"],
                    e["source"],
                    e["target"],
                    e["text"],
                    Embedding(np.array(e["vector"])),
                )
                for e in data.get("edges", [])
            ]
            return cls(
                code=data["code"],
                description=data.get("description", ""),
                nodes=nodes,
                edges=edges,
                embedder_fingerprint=data.get("embedder_fingerprint", ""),
            )
        except (KeyError, TypeError) as exc:
            raise GraphFormatError(f"bad graph document: {exc}") from None

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    @classmethod
    def from_json(cls, text: str) -> "KnowledgeGraph":
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise GraphFormatError(f"graph document is not valid JSON: {exc}") from None
        return cls.from_dict(data)


# ---------------------------------------------------------------------------
# Building
# ---------------------------------------------------------------------------


def build_graph(
    code: str,
    description: str,
    embedder,
    rules: ExtractionRuleSet | None = None,
) -> KnowledgeGraph:
    """Extract entities/relations from a description and embed every element."""
    result = extract_text(description, rules)

    def embed_checked(text: str) -> Embedding:
        emb = embedder.embed(text)
        if emb.is_zero:
            raise EmptyEmbeddingError(f"element {text!r} embeds to the zero vector")
        return emb

    entities = result.entities
    nodes = [
        GraphNode(id=f"n{i}", text=e.text, embedding=embed_checked(e.text))
        for i, e in enumerate(entities)
    ]

    def endpoints(rel) -> tuple[int, int]:
        # relations join consecutive entities; fall back to first text match
        for i in range(len(entities) - 1):
            if entities[i].text == rel.subject and entities[i + 1].text == rel.object:
                return i, i + 1
        si = next(i for i, e in enumerate(entities) if e.text == rel.subject)
        oi = next(i for i, e in enumerate(entities) if e.text == rel.object)
        return si, oi

    edges = []
    for j, rel in enumerate(result.relations):
        si, oi = endpoints(rel)
        edges.append(
            GraphEdge(
                id=f"e{j}",
                source=f"n{si}",
                target=f"n{oi}",
                text=rel.link,
                embedding=embed_checked(rel.link),
            )
        )

    fingerprint = ""
    config = getattr(embedder, "config", None)
    if config is not None:
        fingerprint = config.fingerprint()
    return KnowledgeGraph(
        code=code,
        description=description,
        nodes=nodes,
        edges=edges,
        embedder_fingerprint=fingerprint,
    )


# ---------------------------------------------------------------------------
# Scoring
# ---------------------------------------------------------------------------


class ColorBucket(str, enum.Enum):
    GREEN = "Green"
    LIGHT_GREEN = "LightGreen"
    YELLOW = "Yellow"
    BLUE = "Blue"


@dataclass(frozen=True)
class ColorThresholds:
    green: float = 0.75
    light_green: float = 0.5
    yellow: float = 0.25

    def __post_init__(self):
        if not self.green > self.light_green > self.yellow:
            raise ValueError("color thresholds must be strictly decreasing")

    def bucket(self, similarity: float) -> ColorBucket:
        if similarity >= self.green:
            return ColorBucket.GREEN
        if similarity >= self.light_green:
            return ColorBucket.LIGHT_GREEN
        if similarity >= self.yellow:
            return ColorBucket.YELLOW
        return ColorBucket.BLUE


@dataclass
class MatchResult:
    code: str
    average_similarity: float
    per_element: list[tuple[str, float, ColorBucket]]


def score(
    query_embedding: Embedding,
    graph: KnowledgeGraph,
    thresholds: ColorThresholds | None = None,
) -> MatchResult:
    """Average cosine of the query against every node and edge of one graph."""
    thresholds = thresholds or ColorThresholds()
    per_element: list[tuple[str, float, ColorBucket]] = []
    total = 0.0
    for element_id, _, embedding in graph.elements():
        sim = cosine(query_embedding, embedding)
        total += sim
        per_element.append((element_id, sim, thresholds.bucket(sim)))
    return MatchResult(
        code=graph.code,
        average_similarity=total / graph.size,
        per_element=per_element,
    )


def rank_top_k(
    query_embedding: Embedding,
    graphs: list[KnowledgeGraph],
    k: int = 3,
    thresholds: ColorThresholds | None = None,
) -> list[MatchResult]:
    """Best-k graphs by average similarity; ties break by code ascending."""
    if k < 1:
        raise ValueError("k must be at least 1")
    if not graphs:
        raise ValueError("no graphs to rank")
    results = [score(query_embedding, g, thresholds) for g in graphs]
    results.sort(key=lambda r: (-r.average_similarity, r.code))
    return results[:k]


# ---------------------------------------------------------------------------
# Annotated rendering
# ---------------------------------------------------------------------------

_DOT_COLORS = {
    ColorBucket.GREEN: "green",
    ColorBucket.LIGHT_GREEN: "lightgreen",
    ColorBucket.YELLOW: "yellow",
    ColorBucket.BLUE: "lightblue",
}


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def to_annotated_graph(
    graph: KnowledgeGraph, match: MatchResult | None = None
) -> str:
    """Graphviz rendering; element colors follow the match, blue without one."""
    colors: dict[str, ColorBucket] = {
        eid: ColorBucket.BLUE for eid, _, _ in graph.elements()
    }
    if match is not None:
        if match.code != graph.code or len(match.per_element) != graph.size:
            raise MatchGraphMismatchError(
                f"match for {match.code} does not belong to graph {graph.code}"
            )
        for element_id, _, bucket in match.per_element:
            if element_id not in colors:
                raise MatchGraphMismatchError(
                    f"match references unknown element {element_id}"
                )
            colors[element_id] = bucket

    lines = [f'digraph "{_dot_escape(graph.code)}" {{', "  rankdir=LR;"]
    for node in graph.nodes:
        lines.append(
            f'  {node.id} [label="{_dot_escape(node.text)}", style=filled, '
            f'fillcolor="{_DOT_COLORS[colors[node.id]]}"];'
        )
    for edge in graph.edges:
        lines.append(
            f'  {edge.source} -> {edge.target} [label="{_dot_escape(edge.text)}", '
            f'color="{_DOT_COLORS[colors[edge.id]]}"];'
        )
    lines.append("}")
    return "\n".join(lines) + "\n"

"""Per-sentence labeling lattices for the three model families.

Each lattice is a rooted DAG whose root-to-leaf paths are in bijection with
the legal labelings of one sentence:

- ``linear``: one node per (position, BIO tag); edges connect adjacent
  positions and respect BIO validity.
- ``semi``: one node per (position, segment label), a node marking a segment
  that ends at that position; an edge spans the whole segment, so it carries
  the segment templates plus the label-transition template.
- ``weak``: every segment node splits into a Begin and an End node.  Segment
  edges (Begin -> End, same label) carry only segment templates; transition
  edges (End -> next Begin, any label pair) carry only the transition
  template.  Choosing a segment's length and choosing the next label become
  separate decisions, which shrinks the edge count from
  O(n * L * |labels|^2) to O(n * |labels|^2 + n * L * |labels|).

Nodes are stored in topological order (outside label first within a layer;
decoding tie-breaks rely on that).  Edges always point from a lower to a
higher node id, and every node is reachable from the root and co-reachable
from the leaf.  Feature vectors are computed once at construction; a built
lattice is immutable and safe to share read-only.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .core import OUTSIDE, BioSequence, LabelSet, Sentence, Token, WordSpan, bio_to_word_spans, word_spans_to_bio
from .features import (
    EMPTY_FEATURES,
    START_LABEL,
    STOP_LABEL,
    FeatureExtractor,
    FeatureVector,
)

MODEL_KINDS = ("linear", "semi", "weak")


class LatticeError(ValueError):
    """Raised when a labeling cannot be represented in a lattice."""


class NodeKind(enum.Enum):
    ROOT = "root"
    LEAF = "leaf"
    TAG = "tag"       # linear trellis only
    SEG = "seg"       # segment lattice: a segment with this label ends here
    BEGIN = "begin"   # split-node lattice only
    END = "end"       # split-node lattice only


class EdgeClass(enum.Enum):
    TRANSITION = "transition"
    SEGMENT = "segment"


@dataclass(frozen=True, slots=True)
class Node:
    kind: NodeKind
    position: int
    label: str | None = None

    def __str__(self) -> str:
        if self.kind is NodeKind.ROOT:
            return "Root"
        if self.kind is NodeKind.LEAF:
            return "Leaf"
        return f"{self.kind.value.capitalize()}({self.position},{self.label})"


@dataclass(frozen=True, slots=True)
class Edge:
    src: int
    dst: int
    edge_class: EdgeClass
    features: FeatureVector


def _concat_features(a: FeatureVector, b: FeatureVector) -> FeatureVector:
    if len(a) == 0:
        return b
    if len(b) == 0:
        return a
    return FeatureVector(
        np.concatenate([a.indices, b.indices]),
        np.concatenate([a.values, b.values]),
    )


class Lattice:
    """Immutable compiled lattice: nodes, edges, adjacency, flat feature arrays."""

    def __init__(
        self,
        model_kind: str,
        sentence: Sentence,
        label_set: LabelSet,
        max_seg_len: int,
        nodes: list[Node],
        node_ids: dict[tuple, int],
        edges: list[Edge],
        edge_index: dict[tuple[int, int], int],
    ) -> None:
        self.model_kind = model_kind
        self.sentence = sentence
        self.label_set = label_set
        self.max_seg_len = max_seg_len
        self.nodes = nodes
        self.edges = edges
        self._node_ids = node_ids
        self._edge_index = edge_index
        self.root = 0
        self.leaf = len(nodes) - 1

        num_edges = len(edges)
        self.edge_src = np.fromiter((e.src for e in edges), dtype=np.int32, count=num_edges)
        self.edge_dst = np.fromiter((e.dst for e in edges), dtype=np.int32, count=num_edges)

        in_lists: list[list[int]] = [[] for _ in nodes]
        out_lists: list[list[int]] = [[] for _ in nodes]
        for eid, e in enumerate(edges):
            in_lists[e.dst].append(eid)
            out_lists[e.src].append(eid)
        # In-edges sorted by source id: decoding prefers the topologically
        # earliest predecessor on ties, which argmax-first then implements.
        self.in_edges = [
            np.asarray(sorted(eids, key=lambda i: edges[i].src), dtype=np.int32) for eids in in_lists
        ]
        self.out_edges = [np.asarray(eids, dtype=np.int32) for eids in out_lists]

        counts = np.fromiter((len(e.features) for e in edges), dtype=np.int64, count=num_edges)
        self.feat_ptr = np.zeros(num_edges + 1, dtype=np.int64)
        np.cumsum(counts, out=self.feat_ptr[1:])
        if num_edges:
            self.feat_idx = np.concatenate([e.features.indices for e in edges])
            self.feat_val = np.concatenate([e.features.values for e in edges])
        else:
            self.feat_idx = np.zeros(0, dtype=np.int32)
            self.feat_val = np.zeros(0, dtype=np.float64)
        self.feat_edge = np.repeat(np.arange(num_edges, dtype=np.int32), counts)

        self._check_connected()

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_edges(self) -> int:
        return len(self.edges)

    def _check_connected(self) -> None:
        fwd = np.zeros(self.num_nodes, dtype=bool)
        fwd[self.root] = True
        for v in range(self.num_nodes):
            if fwd[v]:
                for eid in self.out_edges[v]:
                    fwd[self.edges[eid].dst] = True
        bwd = np.zeros(self.num_nodes, dtype=bool)
        bwd[self.leaf] = True
        for v in range(self.num_nodes - 1, -1, -1):
            if bwd[v]:
                for eid in self.in_edges[v]:
                    bwd[self.edges[eid].src] = True
        if not (fwd.all() and bwd.all()):
            raise AssertionError("lattice has unreachable or dead-end nodes")

    def edge_id(self, src: int, dst: int) -> int | None:
        return self._edge_index.get((src, dst))

    def edge_list_text(self) -> str:
        """Debug export: one ``from -> to [class]`` line per edge."""
        lines = [
            f"{self.nodes[e.src]} -> {self.nodes[e.dst]} [{e.edge_class.value}]"
            for e in self.edges
        ]
        return "\n".join(lines) + "\n"

    # ------------------------------------------------------------------
    # Mapping between node paths and chunk structure.
    # ------------------------------------------------------------------

    def path_spans(self, node_path: list[int]) -> list[WordSpan]:
        """Chunk spans encoded by a full root-to-leaf node path."""
        interior = [self.nodes[v] for v in node_path[1:-1]]
        if self.model_kind == "linear":
            tags = tuple(node.label for node in interior)
            return bio_to_word_spans(BioSequence(tags))
        spans: list[WordSpan] = []
        if self.model_kind == "semi":
            prev_end = -1
            for node in interior:
                if node.label != OUTSIDE:
                    spans.append(WordSpan(prev_end + 1, node.position, node.label))
                prev_end = node.position
            return spans
        for begin, end in zip(interior[0::2], interior[1::2]):
            if begin.label != OUTSIDE:
                spans.append(WordSpan(begin.position, end.position, begin.label))
        return spans

    def _segments(self, spans: list[WordSpan]) -> list[tuple[int, int, str]]:
        ordered = sorted(spans, key=lambda s: s.first_token)
        segments: list[tuple[int, int, str]] = []
        cursor = 0
        for span in ordered:
            if span.first_token < cursor:
                raise LatticeError("overlapping gold spans")
            while cursor < span.first_token:
                segments.append((cursor, cursor, OUTSIDE))
                cursor += 1
            segments.append((span.first_token, span.last_token, span.label))
            cursor = span.last_token + 1
        while cursor < len(self.sentence):
            segments.append((cursor, cursor, OUTSIDE))
            cursor += 1
        return segments

    def gold_node_path(self, spans: list[WordSpan]) -> list[int]:
        """Node path realizing the given chunk structure.

        Raises :class:`LatticeError` when the structure is not representable
        (unknown label, segment too long, or a missing edge).
        """
        try:
            if self.model_kind == "linear":
                bio = word_spans_to_bio(self.sentence, spans)
                keys = [("tag", i, tag) for i, tag in enumerate(bio.tags)]
            elif self.model_kind == "semi":
                keys = [("seg", last, label) for _, last, label in self._segments(spans)]
            else:
                keys = []
                for first, last, label in self._segments(spans):
                    keys.append(("begin", first, label))
                    keys.append(("end", last, label))
        except ValueError as exc:
            raise LatticeError(str(exc)) from exc
        path = [self.root]
        for key in keys:
            node = self._node_ids.get(key)
            if node is None:
                raise LatticeError(f"no lattice node for {key}")
            path.append(node)
        path.append(self.leaf)
        for src, dst in zip(path, path[1:]):
            if self.edge_id(src, dst) is None:
                raise LatticeError(f"missing edge {self.nodes[src]} -> {self.nodes[dst]}")
        return path

    def gold_edge_ids(self, spans: list[WordSpan]) -> list[int]:
        path = self.gold_node_path(spans)
        return [self._edge_index[(src, dst)] for src, dst in zip(path, path[1:])]


class _Builder:
    def __init__(self, model_kind: str, sentence: Sentence, label_set: LabelSet, max_seg_len: int) -> None:
        self.model_kind = model_kind
        self.sentence = sentence
        self.label_set = label_set
        self.max_seg_len = max_seg_len
        self.nodes: list[Node] = []
        self.node_ids: dict[tuple, int] = {}
        self.edges: list[Edge] = []
        self.edge_index: dict[tuple[int, int], int] = {}

    def add_node(self, key: tuple, node: Node) -> int:
        nid = len(self.nodes)
        self.nodes.append(node)
        self.node_ids[key] = nid
        return nid

    def add_edge(self, src: int, dst: int, cls: EdgeClass, features: FeatureVector) -> None:
        if not src < dst:
            raise AssertionError("edges must go forward in topological order")
        self.edge_index[(src, dst)] = len(self.edges)
        self.edges.append(Edge(src, dst, cls, features))

    def build(self) -> Lattice:
        return Lattice(
            self.model_kind,
            self.sentence,
            self.label_set,
            self.max_seg_len,
            self.nodes,
            self.node_ids,
            self.edges,
            self.edge_index,
        )


class _FeatureMemo:
    """Per-build cache so identical templates are expanded once.

    Segment templates depend only on (first, last, label); the transition
    template only on the label pair.  Edges that share them get the cached
    vectors concatenated, which is what keeps the conventional segment
    lattice's larger edge count visible in construction cost without
    re-running string expansion per edge.
    """

    def __init__(self, extractor: FeatureExtractor | None, sentence: Sentence) -> None:
        self.extractor = extractor
        self.sentence = sentence
        self._segments: dict[tuple[int, int, str], FeatureVector] = {}
        self._transitions: dict[tuple[str, str], FeatureVector] = {}
        self._token_ctx: dict[tuple[int, str], FeatureVector] = {}
        self._token_tr: dict[tuple[str, str], FeatureVector] = {}

    def segment(self, first: int, last: int, label: str) -> FeatureVector:
        if self.extractor is None:
            return EMPTY_FEATURES
        key = (first, last, label)
        fv = self._segments.get(key)
        if fv is None:
            fv = self.extractor.segment_features(self.sentence, first, last, label, prev_label=None)
            self._segments[key] = fv
        return fv

    def transition(self, prev_label: str, label: str) -> FeatureVector:
        if self.extractor is None:
            return EMPTY_FEATURES
        key = (prev_label, label)
        fv = self._transitions.get(key)
        if fv is None:
            fv = self.extractor.transition_features(prev_label, label)
            self._transitions[key] = fv
        return fv

    def token_context(self, position: int, cur_tag: str) -> FeatureVector:
        if self.extractor is None:
            return EMPTY_FEATURES
        key = (position, cur_tag)
        fv = self._token_ctx.get(key)
        if fv is None:
            fv = self.extractor._to_vector(
                self.extractor.token_context_features(self.sentence, position, cur_tag)
            )
            self._token_ctx[key] = fv
        return fv

    def token_transition(self, prev_tag: str, cur_tag: str) -> FeatureVector:
        if self.extractor is None:
            return EMPTY_FEATURES
        key = (prev_tag, cur_tag)
        fv = self._token_tr.get(key)
        if fv is None:
            idx = self.extractor.dictionary.index(f"T={prev_tag}|{cur_tag}")
            fv = FeatureVector.from_indices([] if idx is None else [idx])
            self._token_tr[key] = fv
        return fv


def _bio_ok(prev_tag: str, cur_tag: str) -> bool:
    if cur_tag.startswith("I-"):
        return prev_tag == f"B-{cur_tag[2:]}" or prev_tag == cur_tag
    return True


def build_linear(sentence: Sentence, label_set: LabelSet, extractor: FeatureExtractor | None) -> Lattice:
    """Token-level trellis over BIO tags with validity-pruned edges."""
    n = len(sentence)
    if n == 0:
        raise ValueError("cannot build a lattice for an empty sentence")
    b = _Builder("linear", sentence, label_set, 1)
    memo = _FeatureMemo(extractor, sentence)
    tags = label_set.bio_tags
    b.add_node(("root",), Node(NodeKind.ROOT, -1))
    for i in range(n):
        for tag in tags:
            if i == 0 and tag.startswith("I-"):
                continue  # nothing to continue at the first position
            b.add_node(("tag", i, tag), Node(NodeKind.TAG, i, tag))
    leaf = b.add_node(("leaf",), Node(NodeKind.LEAF, n))

    for tag in tags:
        if tag.startswith("I-"):
            continue
        fv = _concat_features(memo.token_context(0, tag), memo.token_transition(START_LABEL, tag))
        b.add_edge(0, b.node_ids[("tag", 0, tag)], EdgeClass.TRANSITION, fv)
    for i in range(1, n):
        for cur in tags:
            dst = b.node_ids[("tag", i, cur)]
            ctx = memo.token_context(i, cur)
            for prev in tags:
                if i == 1 and prev.startswith("I-"):
                    continue
                if not _bio_ok(prev, cur):
                    continue
                fv = _concat_features(ctx, memo.token_transition(prev, cur))
                b.add_edge(b.node_ids[("tag", i - 1, prev)], dst, EdgeClass.TRANSITION, fv)
    for tag in tags:
        if n == 1 and tag.startswith("I-"):
            continue
        ctx = memo.token_context(n, STOP_LABEL)
        fv = _concat_features(ctx, memo.token_transition(tag, STOP_LABEL))
        b.add_edge(b.node_ids[("tag", n - 1, tag)], leaf, EdgeClass.TRANSITION, fv)
    return b.build()


def _segment_length_limit(label: str, max_seg_len: int, outside_max_len: int) -> int:
    return outside_max_len if label == OUTSIDE else max_seg_len


def build_semi(
    sentence: Sentence,
    label_set: LabelSet,
    max_seg_len: int,
    extractor: FeatureExtractor | None,
    outside_max_len: int = 1,
) -> Lattice:
    """Segment lattice: an edge covers a whole segment and carries both the
    segment templates and the transition template."""
    n = len(sentence)
    if n == 0:
        raise ValueError("cannot build a lattice for an empty sentence")
    if max_seg_len < 1:
        raise ValueError("max_seg_len must be >= 1")
    b = _Builder("semi", sentence, label_set, max_seg_len)
    memo = _FeatureMemo(extractor, sentence)
    alphabet = label_set.alphabet
    b.add_node(("root",), Node(NodeKind.ROOT, -1))
    for i in range(n):
        for label in alphabet:
            b.add_node(("seg", i, label), Node(NodeKind.SEG, i, label))
    leaf = b.add_node(("leaf",), Node(NodeKind.LEAF, n))

    for i in range(n):
        for label in alphabet:
            dst = b.node_ids[("seg", i, label)]
            limit = _segment_length_limit(label, max_seg_len, outside_max_len)
            for k in range(1, min(limit, i + 1) + 1):
                j = i - k
                seg_fv = memo.segment(j + 1, i, label)
                if j < 0:
                    fv = _concat_features(seg_fv, memo.transition(START_LABEL, label))
                    b.add_edge(0, dst, EdgeClass.SEGMENT, fv)
                else:
                    for prev in alphabet:
                        fv = _concat_features(seg_fv, memo.transition(prev, label))
                        b.add_edge(b.node_ids[("seg", j, prev)], dst, EdgeClass.SEGMENT, fv)
    for label in alphabet:
        fv = memo.transition(label, STOP_LABEL)
        b.add_edge(b.node_ids[("seg", n - 1, label)], leaf, EdgeClass.TRANSITION, fv)
    return b.build()


def build_weak(
    sentence: Sentence,
    label_set: LabelSet,
    max_seg_len: int,
    extractor: FeatureExtractor | None,
    outside_max_len: int = 1,
) -> Lattice:
    """Split-node segment lattice: segment-length and label-transition
    decisions live on separate edges."""
    n = len(sentence)
    if n == 0:
        raise ValueError("cannot build a lattice for an empty sentence")
    if max_seg_len < 1:
        raise ValueError("max_seg_len must be >= 1")
    b = _Builder("weak", sentence, label_set, max_seg_len)
    memo = _FeatureMemo(extractor, sentence)
    alphabet = label_set.alphabet
    b.add_node(("root",), Node(NodeKind.ROOT, -1))
    for i in range(n):
        for label in alphabet:
            b.add_node(("begin", i, label), Node(NodeKind.BEGIN, i, label))
        for label in alphabet:
            b.add_node(("end", i, label), Node(NodeKind.END, i, label))
    leaf = b.add_node(("leaf",), Node(NodeKind.LEAF, n))

    for label in alphabet:
        b.add_edge(0, b.node_ids[("begin", 0, label)], EdgeClass.TRANSITION, memo.transition(START_LABEL, label))
    for j in range(n):
        for label in alphabet:
            src = b.node_ids[("begin", j, label)]
            limit = _segment_length_limit(label, max_seg_len, outside_max_len)
            for i in range(j, min(j + limit, n)):
                b.add_edge(src, b.node_ids[("end", i, label)], EdgeClass.SEGMENT, memo.segment(j, i, label))
    for i in range(n - 1):
        for prev in alphabet:
            src = b.node_ids[("end", i, prev)]
            for label in alphabet:
                b.add_edge(src, b.node_ids[("begin", i + 1, label)], EdgeClass.TRANSITION, memo.transition(prev, label))
    for label in alphabet:
        b.add_edge(b.node_ids[("end", n - 1, label)], leaf, EdgeClass.TRANSITION, memo.transition(label, STOP_LABEL))
    return b.build()


def build_lattice(
    model_kind: str,
    sentence: Sentence,
    label_set: LabelSet,
    max_seg_len: int,
    extractor: FeatureExtractor | None,
    outside_max_len: int = 1,
) -> Lattice:
    if model_kind == "linear":
        return build_linear(sentence, label_set, extractor)
    if model_kind == "semi":
        return build_semi(sentence, label_set, max_seg_len, extractor, outside_max_len)
    if model_kind == "weak":
        return build_weak(sentence, label_set, max_seg_len, extractor, outside_max_len)
    raise ValueError(f"unknown model kind {model_kind!r} (expected one of {MODEL_KINDS})")


def synthetic_sentence(n: int) -> Sentence:
    """An n-token placeholder sentence for structural experiments."""
    tokens = []
    offset = 0
    for i in range(n):
        word = f"w{i}"
        tokens.append(Token(word, offset, offset + len(word)))
        offset += len(word) + 1
    text = " ".join(tok.surface for tok in tokens)
    return Sentence(text, tuple(tokens))

"""Lattice constructions: path sets, edge features, adjacency, export."""

import numpy as np
import pytest

from chunkcrf.core import LabelSet, WordSpan, tokenize
from chunkcrf.features import FeatureConfig, FeatureDictionary, FeatureExtractor, TRANSITION_PREFIXES
from chunkcrf.lattice import (
    EdgeClass,
    LatticeError,
    build_lattice,
    build_linear,
    build_semi,
    build_weak,
    synthetic_sentence,
)

from oracles import (
    all_edge_paths,
    enumerate_bio_spansets,
    enumerate_segmentations,
    path_nodes,
    segmentation_spanset,
)

NP = LabelSet(("NP",))


def make_extractor(max_seg_len=6, **flags):
    d = FeatureDictionary()
    return FeatureExtractor(FeatureConfig(max_seg_len=max_seg_len, **flags), d)


def spanset(lattice, edge_path):
    spans = lattice.path_spans(path_nodes(lattice, edge_path))
    return tuple((s.first_token, s.last_token, s.label) for s in spans)


class TestLinear:
    def test_single_token_has_two_paths(self):
        lat = build_linear(tokenize("a"), NP, make_extractor())
        assert len(all_edge_paths(lat)) == 2

    def test_two_tokens_have_five_valid_bio_paths(self):
        lat = build_linear(tokenize("a b"), NP, make_extractor())
        assert len(all_edge_paths(lat)) == 5

    def test_no_edge_from_outside_to_inside(self):
        lat = build_linear(tokenize("a b"), NP, make_extractor())
        assert "Tag(0,O) -> Tag(1,I-NP)" not in lat.edge_list_text()

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_paths_biject_with_valid_bio_strings(self, n):
        lat = build_linear(synthetic_sentence(n), NP, make_extractor())
        lattice_sets = {spanset(lat, p) for p in all_edge_paths(lat)}
        direct = enumerate_bio_spansets(n, NP)
        assert lattice_sets == direct
        assert len(all_edge_paths(lat)) == len(direct)

    def test_two_chunk_labels(self):
        labels = LabelSet(("NP", "VP"))
        lat = build_linear(synthetic_sentence(3), labels, make_extractor())
        assert {spanset(lat, p) for p in all_edge_paths(lat)} == enumerate_bio_spansets(3, labels)

    def test_empty_sentence_rejected(self):
        with pytest.raises(ValueError):
            build_linear(tokenize(""), NP, make_extractor())


class TestSemi:
    def test_n3_l2_has_twelve_paths(self):
        lat = build_semi(tokenize("a b c"), NP, 2, make_extractor(2))
        assert len(all_edge_paths(lat)) == 12

    def test_no_segment_longer_than_limit(self):
        lat = build_semi(synthetic_sentence(6), NP, 2, make_extractor(2))
        for p in all_edge_paths(lat):
            for first, last, _ in spanset(lat, p):
                assert last - first + 1 <= 2

    @pytest.mark.parametrize("n,max_len", [(1, 1), (2, 2), (3, 2), (4, 3), (5, 3)])
    def test_paths_biject_with_segmentations(self, n, max_len):
        lat = build_semi(synthetic_sentence(n), NP, max_len, make_extractor(max_len))
        lattice_paths = all_edge_paths(lat)
        direct = enumerate_segmentations(n, NP, max_len)
        assert len(lattice_paths) == len(direct)
        assert {spanset(lat, p) for p in lattice_paths} == {
            segmentation_spanset(seg) for seg in direct
        }

    def test_length_one_limit_equals_single_token_chunkings(self):
        # With the segment limit at one, the path set is the linear model's
        # chunking space restricted to single-token chunks, adjacent chunks
        # staying distinct.
        for n in (1, 2, 3, 4):
            lat = build_semi(synthetic_sentence(n), NP, 1, make_extractor(1))
            semi_sets = {spanset(lat, p) for p in all_edge_paths(lat)}
            linear = build_linear(synthetic_sentence(n), NP, make_extractor())
            linear_single = {
                s
                for s in (spanset(linear, p) for p in all_edge_paths(linear))
                if all(last == first for first, last, _ in s)
            }
            assert semi_sets == linear_single
            assert len(all_edge_paths(lat)) == 2**n


class TestWeak:
    def test_same_path_count_as_semi(self):
        ext = make_extractor(2)
        semi = build_semi(tokenize("a b c"), NP, 2, ext)
        weak = build_weak(tokenize("a b c"), NP, 2, ext)
        assert len(all_edge_paths(weak)) == len(all_edge_paths(semi)) == 12

    @pytest.mark.parametrize("n,max_len", [(1, 1), (3, 2), (4, 3), (5, 2)])
    def test_same_spanset_family_as_semi(self, n, max_len):
        ext = make_extractor(max_len)
        s = synthetic_sentence(n)
        semi = build_semi(s, NP, max_len, ext)
        weak = build_weak(s, NP, max_len, ext)
        semi_sets = {spanset(semi, p) for p in all_edge_paths(semi)}
        weak_sets = {spanset(weak, p) for p in all_edge_paths(weak)}
        assert semi_sets == weak_sets

    def test_segment_edges_never_change_label(self):
        lat = build_weak(synthetic_sentence(4), NP, 3, make_extractor(3))
        for e in lat.edges:
            if e.edge_class is EdgeClass.SEGMENT:
                assert lat.nodes[e.src].label == lat.nodes[e.dst].label

    def test_segment_edges_carry_no_transition_features(self):
        d = FeatureDictionary()
        ext = FeatureExtractor(FeatureConfig(max_seg_len=3), d)
        lat = build_weak(synthetic_sentence(4), NP, 3, ext)
        for e in lat.edges:
            names = {d.string(i) for i in e.features.indices}
            if e.edge_class is EdgeClass.SEGMENT:
                assert not any(name.startswith(TRANSITION_PREFIXES) for name in names)
            else:
                assert all(name.startswith("TR=") for name in names)

    def test_edge_count_bounds(self):
        labels = LabelSet(("NP",))
        lat = build_weak(synthetic_sentence(10), labels, 6, make_extractor())
        num_labels = len(labels.alphabet)
        segment_edges = sum(1 for e in lat.edges if e.edge_class is EdgeClass.SEGMENT)
        transition_edges = lat.num_edges - segment_edges
        assert segment_edges <= 10 * 6 * num_labels
        assert transition_edges <= 10 * num_labels**2 + 2 * num_labels


class TestEdgeFeatures:
    def test_semi_edge_features_match_direct_extraction(self):
        d = FeatureDictionary()
        ext = FeatureExtractor(FeatureConfig(max_seg_len=3, use_shape=True), d)
        s = tokenize("Dr teh says it")
        lat = build_semi(s, NP, 3, ext)
        dst = lat._node_ids[("seg", 3, "O")]
        # outside segments are single-token, so no edge skips position 2
        assert lat.edge_id(lat._node_ids[("seg", 1, "NP")], dst) is None
        eid = lat.edge_id(lat._node_ids[("seg", 2, "NP")], dst)
        direct = ext.segment_features(s, 3, 3, "O", prev_label="NP")
        assert set(lat.edges[eid].features.indices.tolist()) == set(direct.indices.tolist())

    def test_linear_edge_features_match_direct_extraction(self):
        d = FeatureDictionary()
        ext = FeatureExtractor(FeatureConfig(use_affix=True), d)
        s = tokenize("Dr teh")
        lat = build_linear(s, NP, ext)
        src = lat._node_ids[("tag", 0, "B-NP")]
        dst = lat._node_ids[("tag", 1, "I-NP")]
        eid = lat.edge_id(src, dst)
        direct = ext.linear_features(s, 1, "B-NP", "I-NP")
        assert set(lat.edges[eid].features.indices.tolist()) == set(direct.indices.tolist())

    def test_features_cached_once_per_segment(self):
        d = FeatureDictionary()
        ext = FeatureExtractor(FeatureConfig(max_seg_len=2), d)
        lat = build_semi(tokenize("a b c"), NP, 2, ext)
        # edges into the same segment from different predecessors share the
        # segment features and differ only in the transition feature
        ids = [
            lat.edge_id(lat._node_ids[("seg", 0, prev)], lat._node_ids[("seg", 1, "NP")])
            for prev in ("O", "NP")
        ]
        names = [{d.string(i) for i in lat.edges[e].features.indices} for e in ids]
        assert names[0] ^ names[1] == {"TR=O|NP", "TR=NP|NP"}


class TestGoldPaths:
    def test_gold_path_exists_for_every_model(self):
        s = tokenize("a b c d")
        gold = [WordSpan(1, 2, "NP")]
        for kind in ("linear", "semi", "weak"):
            lat = build_lattice(kind, s, NP, 3, make_extractor(3))
            edges = lat.gold_edge_ids(gold)
            assert spanset(lat, edges) == ((1, 2, "NP"),)

    def test_too_long_span_is_unrepresentable_in_segment_models(self):
        s = tokenize("a b c d")
        gold = [WordSpan(0, 3, "NP")]
        for kind in ("semi", "weak"):
            lat = build_lattice(kind, s, NP, 2, make_extractor(2))
            with pytest.raises(LatticeError):
                lat.gold_edge_ids(gold)

    def test_unknown_label_is_unrepresentable(self):
        s = tokenize("a b")
        lat = build_semi(s, NP, 2, make_extractor(2))
        with pytest.raises(LatticeError):
            lat.gold_edge_ids([WordSpan(0, 0, "VP")])

    def test_adjacent_same_label_chunks_are_representable(self):
        s = tokenize("a b")
        gold = [WordSpan(0, 0, "NP"), WordSpan(1, 1, "NP")]
        for kind in ("linear", "semi", "weak"):
            lat = build_lattice(kind, s, NP, 2, make_extractor(2))
            assert spanset(lat, lat.gold_edge_ids(gold)) == ((0, 0, "NP"), (1, 1, "NP"))


EXPECTED_WEAK_EXPORT = """\
Root -> Begin(0,O) [transition]
Root -> Begin(0,NP) [transition]
Begin(0,O) -> End(0,O) [segment]
Begin(0,NP) -> End(0,NP) [segment]
Begin(0,NP) -> End(1,NP) [segment]
Begin(1,O) -> End(1,O) [segment]
Begin(1,NP) -> End(1,NP) [segment]
End(0,O) -> Begin(1,O) [transition]
End(0,O) -> Begin(1,NP) [transition]
End(0,NP) -> Begin(1,O) [transition]
End(0,NP) -> Begin(1,NP) [transition]
End(1,O) -> Leaf [transition]
End(1,NP) -> Leaf [transition]
"""


def test_weak_export_golden_file():
    lat = build_weak(tokenize("a b"), NP, 2, make_extractor(2))
    assert lat.edge_list_text() == EXPECTED_WEAK_EXPORT


def test_topological_order_is_respected_everywhere():
    for kind in ("linear", "semi", "weak"):
        lat = build_lattice(kind, synthetic_sentence(5), LabelSet(("NP", "VP")), 3, make_extractor(3))
        for e in lat.edges:
            assert e.src < e.dst

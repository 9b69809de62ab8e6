import itertools

import numpy as np
import pytest

from eqtransport.pipeline.clustering import (
    cluster_panel,
    even_clusters,
    fisher_jenks_breaks,
    jenks_clusters,
    within_class_ss,
)
from eqtransport.pipeline.data import Panel, PanelRecord

from oracles import exhaustive_jenks


def test_even_sizes():
    vals = {2000: {f"e{i}": float(i) for i in range(6)}}
    a = even_clusters(vals, 3)
    assert a.sizes(2000).tolist() == [2, 2, 2]
    assert a[(2000, "e5")] == 0 and a[(2000, "e0")] == 2
    vals = {2000: {f"e{i}": float(i) for i in range(7)}}
    assert even_clusters(vals, 3).sizes(2000).tolist() == [3, 2, 2]


def test_even_lower_is_better():
    vals = {1: {"a": 1.0, "b": 2.0, "c": 3.0}}
    a = even_clusters(vals, 3, higher_is_better=False)
    assert [a[(1, e)] for e in "abc"] == [0, 1, 2]


def test_even_ties_use_entity_id():
    vals = {1: {"d": 5.0, "b": 5.0, "a": 5.0, "c": 5.0}}
    a = even_clusters(vals, 2)
    assert [a[(1, e)] for e in "abcd"] == [0, 0, 1, 1]


def test_even_permutation_equivariant(rng):
    ents = [f"e{i:02d}" for i in range(13)]
    v = rng.integers(0, 5, 13).astype(float)
    base = even_clusters({0: dict(zip(ents, v))}, 4)
    perm = rng.permutation(13)
    shuffled = even_clusters({0: {ents[i]: v[i] for i in perm}}, 4)
    assert base.labels == shuffled.labels


def test_even_errors():
    with pytest.raises(ValueError):
        even_clusters({0: {"a": 1.0}}, 2)
    with pytest.raises(ValueError):
        even_clusters({0: {"a": 1.0}}, 0)


def test_jenks_obvious_gap():
    a = jenks_clusters({0: {"a": 1.0, "b": 2.0, "c": 100.0, "d": 101.0}}, 2)
    assert a[(0, "c")] == a[(0, "d")] == 0
    assert a[(0, "a")] == a[(0, "b")] == 1


def test_jenks_singletons():
    vals = [3.0, 1.0, 7.0, 1.0]
    u, starts = fisher_jenks_breaks(vals, 3)
    assert starts == (0, 1, 2)
    a = jenks_clusters({0: dict(zip("abcd", vals))}, 3)
    assert within_class_ss(vals, [a[(0, e)] for e in "abcd"]) == 0.0


def test_jenks_matches_exhaustive(rng):
    for _ in range(10):
        vals = np.round(rng.normal(size=20) * 3, 2)
        for n in (2, 3, 4):
            u, starts = fisher_jenks_breaks(vals, n)
            labels = np.searchsorted(u[list(starts)], vals, side="right") - 1
            assert within_class_ss(vals, labels) == pytest.approx(exhaustive_jenks(vals, n), abs=1e-9)


def test_jenks_beats_even_split(rng):
    vals = {0: {f"e{i}": float(x) for i, x in enumerate(rng.lognormal(size=40))}}
    for n in (2, 3, 5):
        j = jenks_clusters(vals, n)
        e = even_clusters(vals, n)
        v = list(vals[0].values())
        ks = list(vals[0])
        assert within_class_ss(v, [j[(0, k)] for k in ks]) <= within_class_ss(v, [e[(0, k)] for k in ks]) + 1e-12


def test_jenks_errors_and_log():
    with pytest.raises(ValueError):
        jenks_clusters({0: {"a": 1.0, "b": 1.0}}, 2)
    with pytest.raises(ValueError):
        jenks_clusters({0: {"a": -1.0, "b": 2.0}}, 2, log=True)
    a = jenks_clusters({0: {"a": 1.0, "b": 10.0, "c": 100.0, "d": 1000.0}}, 2, log=True)
    assert a.method == "jenks" and len(a.breaks) == 1


def test_jenks_pooled_vs_per_period():
    vals = {0: {"a": 1.0, "b": 2.0}, 1: {"a": 11.0, "b": 12.0}}
    pooled = jenks_clusters(vals, 2)
    assert pooled[(0, "a")] == pooled[(0, "b")] == 1
    per = jenks_clusters(vals, 2, pooled=False)
    assert per[(1, "b")] == 0 and per[(1, "a")] == 1


def test_paths_and_cluster_panel():
    recs = [PanelRecord(e, p, float(i + p), float(p - i), "s")
            for p in (2000, 2001) for i, e in enumerate("abcd")]
    panel = Panel(tuple(recs))
    ax = cluster_panel(panel, "size_value", 2)
    ents, paths = ax.paths([2000, 2001])
    assert ents == list("abcd")
    assert paths.tolist() == [[1, 1], [1, 1], [0, 0], [0, 0]]
    with pytest.raises(ValueError):
        cluster_panel(panel, "size_value", 2, method="kmeans")


def test_all_even_splits_valid():
    for m, n in itertools.product(range(1, 9), range(1, 5)):
        if m < n:
            continue
        a = even_clusters({0: {f"e{i}": float(i % 3) for i in range(m)}}, n)
        s = a.sizes(0)
        assert s.max() - s.min() <= 1 and s.sum() == m
        assert list(s) == sorted(s, reverse=True)

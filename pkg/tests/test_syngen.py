from collections import Counter, defaultdict

import numpy as np
import pytest

from reccheck.dataset import Interaction, load_catalog, load_interactions, sessionize
from reccheck.errors import ConfigError
from reccheck.models import cooccurrence_model
from reccheck.syngen import SynSpec, generate, generate_data, zipf_probabilities


def by_session(data):
    out = defaultdict(list)
    for r in data.interactions:
        out[r["session_id"]].append(r["item_id"])
    return out


def load_like(data):
    return [Interaction(r["session_id"], r["item_id"], r["timestamp"]) for r in data.interactions]


def test_noise_free_sessions_stay_in_one_cluster():
    data = generate_data(SynSpec(cross_cluster_noise=0.0, n_sessions=500))
    for items in by_session(data).values():
        assert len({data.manifest[i]["cluster"] for i in items}) == 1
        assert len(set(items)) == len(items)


def test_session_lengths_in_range():
    data = generate_data(SynSpec(n_sessions=300, session_len_range=(2, 4)))
    assert {len(v) for v in by_session(data).values()} <= {2, 3, 4}


def test_zipf_head_dominates():
    data = generate_data(SynSpec(preset="zipf", n_items=1000, n_sessions=18000, zipf_exponent=1.1, seed=3))
    counts = Counter(r["item_id"] for r in data.interactions)
    assert len(data.interactions) >= 95_000
    full = np.array([counts.get(r["item_id"], 0) for r in data.catalog])
    assert full[0] > 50 * np.median(full)


def test_zipf_probabilities():
    p = zipf_probabilities(4, 1.0)
    assert p.sum() == pytest.approx(1.0)
    assert p[0] / p[3] == pytest.approx(4.0)


def test_manifest_matches_catalog():
    data = generate_data(SynSpec(n_sessions=50))
    assert set(data.manifest) == {r["item_id"] for r in data.catalog}
    for r in data.catalog:
        m = data.manifest[r["item_id"]]
        assert (m["brand"], m["category_path"], m["price"]) == (r["brand"], r["category_path"], r["price"])
        assert m["brand"] == f"brand{m['cluster']}"
        assert 10.0 <= r["price"] <= 1000.0


def test_cooccurrence_top1_within_cluster():
    data = generate_data(SynSpec(cross_cluster_noise=0.0, n_sessions=2000))
    sessions = sessionize(load_like(data))
    model = cooccurrence_model(sessions)
    items = sorted(data.manifest)
    preds = model.predict([[i] for i in items], 1)
    for item, p in zip(items, preds):
        assert data.manifest[p.items[0]]["cluster"] == data.manifest[item]["cluster"]


def test_deterministic_and_seed_sensitive():
    a = generate_data(SynSpec(n_sessions=100, seed=5))
    assert a.interactions == generate_data(SynSpec(n_sessions=100, seed=5)).interactions
    assert a.interactions != generate_data(SynSpec(n_sessions=100, seed=6)).interactions


def test_files_load_back(tmp_path):
    paths = generate(SynSpec(n_sessions=40), tmp_path)
    assert len(load_catalog(paths["catalog"])) == 100
    assert len(load_interactions(paths["interactions"])) == len(generate_data(SynSpec(n_sessions=40)).interactions)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"preset": "gaussian"},
        {"n_clusters": 0},
        {"session_len_range": (5, 2)},
        {"cross_cluster_noise": 1.0},
        {"items_per_cluster": 4, "session_len_range": (3, 8)},
        {"n_clusters": 1},
    ],
)
def test_invalid_specs(kwargs):
    with pytest.raises(ConfigError):
        SynSpec(**kwargs)

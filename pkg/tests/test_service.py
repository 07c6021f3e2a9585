"""HTTP endpoint behavior: payloads, status mapping, caching, cancellation."""

from __future__ import annotations

import threading

import pytest
from fastapi.testclient import TestClient

from rwenas import __version__
from rwenas.complexity import count_flops
from rwenas.search_space import MacroConfig, decode, parse
from rwenas.service.app import create_app

SMALL_MACRO = {"layers": 2, "channels": 8, "reductions": [2], "classes": 10}
SMALL_EVAL = {"classifiers": 2, "epochs": 3, "batch_size": 128}
SMALL_DATA = {"subsample": [200, 80], "split_seed": 0}
ZERO_GENOME = [0] * 40


@pytest.fixture(scope="module")
def client(small_archive_root):
    app = create_app(data_root=small_archive_root)
    with TestClient(app) as c:
        yield c


def test_health(client):
    body = client.get("/health").json()
    assert body == {"status": "ok", "version": __version__}


def test_flops_matches_direct_computation(client):
    resp = client.post("/flops", json={"genome": ZERO_GENOME, "macro": SMALL_MACRO})
    assert resp.status_code == 200
    body = resp.json()
    macro = MacroConfig(
        num_layers=2, init_channels=8, reduction_positions={2}, num_classes=10
    )
    report = count_flops(decode(parse(ZERO_GENOME), macro))
    assert body["flops"] == report.flops
    assert body["params"] == report.params
    assert len(body["per_layer"]) == len(report.per_layer)
    assert body["per_layer"][0]["layer"] == "stem"
    assert body["per_layer"][-1]["layer"] == "head"


def test_flops_default_macro(client):
    resp = client.post("/flops", json={"genome": ZERO_GENOME})
    assert resp.status_code == 200
    default_report = count_flops(decode(parse(ZERO_GENOME), MacroConfig()))
    assert resp.json()["flops"] == default_report.flops


def test_out_of_bounds_genome_maps_to_400(client):
    bad = list(ZERO_GENOME)
    bad[0] = 2  # node 2 may only reference inputs 0..1
    resp = client.post("/flops", json={"genome": bad})
    assert resp.status_code == 400
    body = resp.json()
    assert body["error"] == "OutOfBounds"
    assert body["category"] == "config"
    assert body["detail"] == {"position": 0, "value": 2, "bound": 1}


def test_wrong_genome_length_maps_to_422(client):
    resp = client.post("/flops", json={"genome": [0] * 39})
    assert resp.status_code == 422


def test_unknown_field_maps_to_422(client):
    resp = client.post("/flops", json={"genome": ZERO_GENOME, "bogus": 1})
    assert resp.status_code == 422


def test_evaluate_is_deterministic_and_echoes_config(client, small_archive_root):
    payload = {
        "genome": ZERO_GENOME,
        "seed": 7,
        "macro": SMALL_MACRO,
        "eval": SMALL_EVAL,
        "data": SMALL_DATA,
    }
    first = client.post("/evaluate", json=payload)
    assert first.status_code == 200
    second = client.post("/evaluate", json=payload).json()
    body = first.json()
    assert body["error"] == second["error"]
    assert body["flops"] == second["flops"]
    assert 0.0 <= body["error"] <= 1.0
    assert body["wall_time_s"] > 0
    cfg = body["config"]
    assert cfg["seed"] == 7
    assert cfg["macro"]["reductions"] == [2]
    assert cfg["data"]["root"] == small_archive_root
    assert cfg["data"]["subsample"] == [200, 80]
    assert "search" not in cfg
    assert "threads" not in cfg


def test_evaluate_flops_agrees_with_flops_endpoint(client):
    payload = {
        "genome": ZERO_GENOME,
        "macro": SMALL_MACRO,
        "eval": SMALL_EVAL,
        "data": SMALL_DATA,
    }
    eval_body = client.post("/evaluate", json=payload).json()
    flops_body = client.post(
        "/flops", json={"genome": ZERO_GENOME, "macro": SMALL_MACRO}
    ).json()
    assert eval_body["flops"] == flops_body["flops"]


def test_missing_data_root_maps_to_404(monkeypatch, tmp_path):
    monkeypatch.delenv("RWE_NAS_DATA", raising=False)
    app = create_app()
    with TestClient(app) as c:
        resp = c.post(
            "/evaluate", json={"genome": ZERO_GENOME, "eval": SMALL_EVAL}
        )
        assert resp.status_code == 404
        assert resp.json()["error"] == "MissingFile"
    # explicit but nonexistent root also 404s, with the path in detail
    app = create_app(data_root=str(tmp_path / "absent"))
    with TestClient(app) as c:
        resp = c.post("/evaluate", json={"genome": ZERO_GENOME})
        assert resp.status_code == 404
        assert "absent" in resp.json()["detail"]["path"]


def test_search_returns_history_and_clean_front(client):
    payload = {
        "seed": 3,
        "search": {"pop": 4, "generations": 2},
        "macro": SMALL_MACRO,
        "eval": SMALL_EVAL,
        "data": SMALL_DATA,
    }
    resp = client.post("/search", json=payload)
    assert resp.status_code == 200
    body = resp.json()
    assert body["interrupted"] is False
    history = body["history"]
    assert len(history["generations"]) == 3
    assert history["config"]["search"]["pop"] == 4
    assert "threads" not in history["config"]
    for snapshot in history["generations"]:
        assert len(snapshot["individuals"]) == 4
    front = body["front"]
    assert front
    for entry in front:
        assert len(entry["genome"]) == 40
        assert 0.0 <= entry["error"] <= 1.0
    # front is mutually non-dominating and sorted by flops
    flops = [e["flops"] for e in front]
    errors = [e["error"] for e in front]
    assert flops == sorted(flops)
    for i in range(len(front)):
        for j in range(len(front)):
            if i == j:
                continue
            dominates = (
                flops[i] <= flops[j]
                and errors[i] <= errors[j]
                and (flops[i] < flops[j] or errors[i] < errors[j])
            )
            assert not dominates


def test_search_cancel_event_returns_partial_history(small_archive_root):
    cancel = threading.Event()
    cancel.set()  # cancel before the first generation boundary
    app = create_app(data_root=small_archive_root, cancel_event=cancel)
    with TestClient(app) as c:
        resp = c.post(
            "/search",
            json={
                "search": {"pop": 4, "generations": 5},
                "macro": SMALL_MACRO,
                "eval": SMALL_EVAL,
                "data": SMALL_DATA,
            },
        )
    assert resp.status_code == 200
    body = resp.json()
    assert body["interrupted"] is True
    assert len(body["history"]["generations"]) == 1
    assert body["front"]  # partial results still carry a usable front


def test_dataset_store_caches_raw_and_split_views(client):
    store = client.app.state.store
    raw_before = len(store._raw)
    split_before = len(store._splits)
    payload = {"genome": ZERO_GENOME, "macro": SMALL_MACRO, "eval": SMALL_EVAL,
               "data": SMALL_DATA}
    client.post("/evaluate", json=payload)
    client.post("/evaluate", json=payload)
    assert len(store._raw) == max(raw_before, 1)
    assert len(store._splits) == max(split_before, 1)
    # a different split key adds exactly one cached view
    other = dict(payload, data={"subsample": [200, 80], "split_seed": 1})
    client.post("/evaluate", json=other)
    assert len(store._splits) == max(split_before, 1) + 1


def test_correlate_endpoint(client):
    resp = client.post(
        "/correlate",
        json={
            "predictions": {"a": 1.0, "b": 2.0, "c": 3.0},
            "truth": {"a": 0.1, "b": 0.2, "c": 0.3},
            "truth_provenance": "unit",
        },
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["rho"] == pytest.approx(1.0)
    assert body["n"] == 3
    assert body["truth_provenance"] == "unit"
    assert len(body["pairs"]) == 3


def test_correlate_missing_truth_maps_to_404(client):
    resp = client.post(
        "/correlate",
        json={"predictions": {"a": 1.0, "b": 2.0}, "truth": {"a": 0.5}},
    )
    assert resp.status_code == 404
    body = resp.json()
    assert body["error"] == "MissingGroundTruth"
    assert body["detail"]["ids"] == ["b"]


def test_correlate_constant_input_maps_to_400(client):
    resp = client.post(
        "/correlate",
        json={"predictions": {"a": 1.0, "b": 1.0}, "truth": {"a": 0.5, "b": 0.7}},
    )
    assert resp.status_code == 400
    assert resp.json()["error"] == "DegenerateInput"

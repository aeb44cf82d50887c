import pytest
from fastapi.testclient import TestClient

from app.engines.tree_model import NOT_FOUND, Key256
from app.main import app, get_tree


@pytest.fixture
def client(thirty_tree):
    app.dependency_overrides[get_tree] = lambda: thirty_tree
    yield TestClient(app)
    app.dependency_overrides.clear()


def hexes(*values):
    return [Key256.from_int(v).hex() for v in values]


def test_root(client):
    assert client.get("/").json()["status"] == "online"


def test_health_without_configured_tree(client):
    body = client.get("/health").json()
    assert body["status"] == "degraded"
    assert body["tree_loaded"] is False
    assert body["max_batch"] == 1000


def test_tree_meta(client):
    meta = client.get("/tree").json()
    assert meta["order_m"] == 4
    assert meta["height_h"] == 3
    assert meta["node_count"] == 14
    summary = client.get("/tree/summary").json()
    assert summary["nodes_per_level"] == [10, 3, 1]


def test_search_returns_input_order(client):
    response = client.post("/search", json={"keys": hexes(29, 0, 3, 3, 99)})
    assert response.status_code == 200
    body = response.json()
    assert body["results"] == [29, NOT_FOUND, 3, 3, NOT_FOUND]
    assert body["found"] == [True, False, True, True, False]
    assert len(body["stats"]["node_loads_per_level"]) == 3


def test_partitioned_search(client):
    single = client.post("/search", json={"keys": hexes(*range(1, 31))}).json()
    split = client.post("/search", json={"keys": hexes(*range(1, 31)), "instances": 3}).json()
    assert split["results"] == single["results"] == list(range(1, 31))
    assert split["stats"]["total_node_loads"] >= single["stats"]["total_node_loads"]


def test_verify(client):
    report = client.post("/verify", json={"keys": hexes(5, 17, 40)}).json()
    assert report["passed"] is True
    assert report["baseline_loads"] == 9


def test_bad_key_is_a_client_error(client):
    response = client.post("/search", json={"keys": ["abc"]})
    assert response.status_code == 400
    assert response.json()["error"] == "InvalidKeyError"


def test_empty_batch_is_a_client_error(client):
    response = client.post("/search", json={"keys": []})
    assert response.status_code == 400
    assert response.json()["error"] == "EmptyBatchError"


def test_missing_tree_is_unavailable():
    app.dependency_overrides.clear()
    with TestClient(app) as client:
        assert client.get("/tree").status_code == 503

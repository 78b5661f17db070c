"""Tests for the HTTP service over a trained model (in-process ASGI)."""

import pytest
from fastapi.testclient import TestClient

from triprec.corpus import save_corpus
from triprec.errors import DataError
from triprec.serve import ServiceState, create_app, load_state


@pytest.fixture(scope="module")
def state(tiny_model, session_corpus):
    return ServiceState(model=tiny_model, pois=session_corpus.pois,
                        model_version="abc123def456")


@pytest.fixture(scope="module")
def client(state):
    with TestClient(create_app(state)) as c:
        yield c


@pytest.fixture()
def bare_client():
    with TestClient(create_app(None)) as c:
        yield c


def recommend_payload(**overrides):
    payload = {"start_poi": "p00", "end_poi": "p05", "start_hour": 9,
               "end_hour": 17, "n": 3}
    payload.update(overrides)
    return payload


# ---------------------------------------------------------------------------
# Readiness


class TestReadiness:
    def test_health_ok_with_model(self, client):
        resp = client.get("/health")
        assert resp.status_code == 200
        assert resp.json() == {"status": "ok", "model_version": "abc123def456"}

    @pytest.mark.parametrize("call", [
        lambda c: c.get("/health"),
        lambda c: c.get("/pois"),
        lambda c: c.post("/recommend", json=recommend_payload()),
    ])
    def test_503_until_loaded(self, bare_client, call):
        resp = call(bare_client)
        assert resp.status_code == 503
        assert resp.json()["detail"] == "model not loaded"


# ---------------------------------------------------------------------------
# POI listing


class TestPois:
    def test_lists_model_vocabulary_with_coordinates(self, client, state):
        resp = client.get("/pois")
        assert resp.status_code == 200
        listing = resp.json()
        assert [p["id"] for p in listing] == list(state.model.vocabulary)
        for entry in listing:
            assert set(entry) == {"id", "lon", "lat"}
            poi = state.pois[entry["id"]]
            assert entry["lon"] == poi.lon
            assert entry["lat"] == poi.lat


# ---------------------------------------------------------------------------
# Recommendation


class TestRecommend:
    def test_valid_query(self, client):
        resp = client.post("/recommend", json=recommend_payload())
        assert resp.status_code == 200
        doc = resp.json()
        assert doc["model_version"] == "abc123def456"
        trip = doc["trip"]
        assert len(trip) == 3
        assert trip[0] == "p00"
        assert trip[-1] == "p05"
        assert [d["id"] for d in doc["poi_details"]] == trip
        for detail in doc["poi_details"]:
            assert set(detail) == {"id", "lon", "lat"}

    def test_matches_direct_model_call(self, client, state):
        from triprec.corpus import Query

        resp = client.post("/recommend", json=recommend_payload(n=4))
        expected = state.model.recommend(Query("p00", 9, "p05", 17, 4))
        assert resp.json()["trip"] == expected

    def test_unknown_poi_is_400(self, client):
        resp = client.post("/recommend", json=recommend_payload(start_poi="ghost"))
        assert resp.status_code == 400
        assert "ghost" in resp.json()["detail"]

    def test_loop_query_is_400(self, client):
        resp = client.post("/recommend",
                           json=recommend_payload(end_poi="p00"))
        assert resp.status_code == 400
        assert "must differ" in resp.json()["detail"]

    def test_bad_hour_is_400(self, client):
        resp = client.post("/recommend", json=recommend_payload(start_hour=24))
        assert resp.status_code == 400
        assert "hour" in resp.json()["detail"]

    def test_infeasible_n_is_422(self, client):
        resp = client.post("/recommend", json=recommend_payload(n=100))
        assert resp.status_code == 422
        assert "without repeats" in resp.json()["detail"]

    def test_n_below_two_is_400(self, client):
        resp = client.post("/recommend", json=recommend_payload(n=1))
        assert resp.status_code == 400
        assert "n 1" in resp.json()["detail"]

    def test_malformed_body_is_422(self, client):
        resp = client.post("/recommend", json={"start_poi": "p00"})
        assert resp.status_code == 422  # pydantic schema validation

    def test_non_integer_hour_is_422(self, client):
        resp = client.post("/recommend",
                           json=recommend_payload(start_hour="morning"))
        assert resp.status_code == 422


# ---------------------------------------------------------------------------
# State loading


class TestLoadState:
    def test_loads_pipeline_artifacts(self, tiny_model, session_corpus, tmp_path):
        tiny_model.save(tmp_path / "model.json")
        save_corpus(session_corpus, tmp_path / "corpus.json")
        st = load_state(tmp_path)
        assert st.model.vocabulary == tiny_model.vocabulary
        assert st.model_version == "unversioned"  # no fingerprint recorded
        query_pois = {p.id for p in st.pois}
        assert set(tiny_model.vocabulary) <= query_pois

    def test_version_is_fingerprint_prefix(self, tiny_model, session_corpus, tmp_path):
        doc = tiny_model.to_dict()
        doc["config_fingerprint"] = "f" * 64
        import json

        (tmp_path / "model.json").write_text(json.dumps(doc))
        save_corpus(session_corpus, tmp_path / "corpus.json")
        st = load_state(tmp_path)
        assert st.model_version == "f" * 12

    def test_missing_model_artifact(self, session_corpus, tmp_path):
        save_corpus(session_corpus, tmp_path / "corpus.json")
        with pytest.raises(DataError, match="triprec train"):
            load_state(tmp_path)

    def test_missing_corpus_artifact(self, tiny_model, tmp_path):
        tiny_model.save(tmp_path / "model.json")
        with pytest.raises(DataError, match="triprec ingest"):
            load_state(tmp_path)

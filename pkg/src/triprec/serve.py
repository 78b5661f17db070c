"""HTTP JSON API over a trained model.

Read-only endpoints against one immutable model snapshot: POST /recommend
answers queries, GET /pois lists the recommendable POIs with coordinates,
GET /health reports readiness (503 until a model is loaded)."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .corpus import PoiTable, Query, load_corpus
from .errors import (DataError, InfeasibleError, NumericError,
                     ValidationError, VocabularyError)
from .selftrain import Model

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ServiceState:
    """Immutable snapshot the service answers from."""

    model: Model
    pois: PoiTable
    model_version: str


def load_state(out_dir) -> ServiceState:
    """Build service state from pipeline artifacts (model.json, corpus.json)."""
    out = Path(out_dir)
    model_path = out / "model.json"
    corpus_path = out / "corpus.json"
    if not model_path.exists():
        raise DataError(f"missing artifact {model_path}; run `triprec train` first")
    if not corpus_path.exists():
        raise DataError(f"missing artifact {corpus_path}; run `triprec ingest` first")
    model = Model.load(model_path)
    corpus = load_corpus(corpus_path)
    version = model.config_fingerprint[:12] if model.config_fingerprint else "unversioned"
    return ServiceState(model=model, pois=corpus.pois, model_version=version)


class RecommendRequest(BaseModel):
    start_poi: str
    end_poi: str
    start_hour: int
    end_hour: int
    n: int


def create_app(state: ServiceState | None = None,
               cors_origins: list[str] | None = None) -> FastAPI:
    """App factory; ``state=None`` models the not-yet-loaded service."""
    app = FastAPI(title="trip recommendation service")
    if cors_origins:
        app.add_middleware(
            CORSMiddleware, allow_origins=list(cors_origins),
            allow_methods=["*"], allow_headers=["*"])
    app.state.service = state

    def service() -> ServiceState:
        if app.state.service is None:
            raise HTTPException(status_code=503, detail="model not loaded")
        return app.state.service

    @app.get("/health")
    def health():
        st = service()
        return {"status": "ok", "model_version": st.model_version}

    @app.get("/pois")
    def pois():
        st = service()
        out = []
        for poi_id in st.model.vocabulary:
            poi = st.pois[poi_id]
            out.append({"id": poi.id, "lon": poi.lon, "lat": poi.lat})
        return out

    @app.post("/recommend")
    def recommend(req: RecommendRequest):
        st = service()
        try:
            query = Query(start_poi=req.start_poi, start_hour=req.start_hour,
                          end_poi=req.end_poi, end_hour=req.end_hour, n=req.n)
            trip = st.model.recommend(query)
        except InfeasibleError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        except (ValidationError, VocabularyError) as exc:
            raise HTTPException(status_code=400, detail=str(exc))
        except NumericError as exc:
            log.error("numeric failure answering /recommend: %s", exc)
            raise HTTPException(status_code=500, detail=str(exc))
        details = []
        for poi_id in trip:
            poi = st.pois[poi_id]
            details.append({"id": poi.id, "lon": poi.lon, "lat": poi.lat})
        return {"trip": trip, "poi_details": details,
                "model_version": st.model_version}

    return app

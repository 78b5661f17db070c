"""Command-line pipeline.

Stages (each reads its predecessors' artifacts from --out-dir and writes
its own): ingest -> build-graph -> walk -> pretrain-poi -> warmup -> train,
plus evaluate / recommend / serve on top. A manifest keyed by per-stage
config fingerprints rejects artifacts built under a different
configuration instead of silently mixing them.

Exit codes: 0 success, 2 config error, 3 data error, 4 numeric error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from .config import Config, load_config
from .corpus import (Corpus, Query, ingest_pois, ingest_trips, load_corpus,
                     save_corpus)
from .embed import PoiEmbeddings, train_poi_embeddings
from .errors import ConfigError, DataError, NumericError
from .evaluation import evaluate_grouped, evaluate_loocv, make_markov_trainer
from .geograph import (augment_graph, build_base_graph,
                       enumerate_query_candidates, generate_walk_corpus,
                       load_graph, load_walks, save_graph, save_walks,
                       transition_matrix)
from .report import write_report
from .selftrain import (Model, TrainConfig, build_model, contrastive_warmup,
                        supervised_train, train)

log = logging.getLogger(__name__)

CORPUS_JSON = "corpus.json"
GRAPH_CSV = "graph.csv"
WALKS_TXT = "walks.txt"
POI_EMB_JSON = "poi_embeddings.json"
MODEL_WARMUP_JSON = "model_warmup.json"
MODEL_JSON = "model.json"
MANIFEST_JSON = "manifest.json"

# rng stream index per stage, so stages draw independent deterministic streams
_STAGE_STREAM = {"walk": 2, "pretrain-poi": 3, "warmup": 4, "train": 5,
                 "evaluate": 6}

# config fields each stage's artifact depends on (cumulative along the chain)
_STAGE_FIELDS: dict[str, set[str]] = {}
_STAGE_FIELDS["ingest"] = {"pois", "trips", "flickr_format", "tz_offset_hours"}
_STAGE_FIELDS["build-graph"] = _STAGE_FIELDS["ingest"] | {"threshold_km"}
_STAGE_FIELDS["walk"] = _STAGE_FIELDS["build-graph"] | {
    "alpha", "m_per_query", "max_attempts_per_walk", "seed"}
_STAGE_FIELDS["pretrain-poi"] = _STAGE_FIELDS["walk"] | {
    "d", "k", "epochs_poi", "batch_size", "lr", "no_warmup"}
_STAGE_FIELDS["warmup"] = _STAGE_FIELDS["pretrain-poi"] | {
    "d_q", "hidden", "f_out", "epochs_warmup", "mask_ratio", "cutoff_ratio",
    "dropout_rate", "allow_identical_views", "concat_query"}
_STAGE_FIELDS["train"] = _STAGE_FIELDS["warmup"] | {
    "epochs_supervised", "no_dest_signal", "finetune_v"}
_STAGE_FIELDS["evaluate"] = _STAGE_FIELDS["train"]


def stage_fingerprint(cfg: Config, stage: str) -> str:
    relevant = {name: getattr(cfg, name) for name in sorted(_STAGE_FIELDS[stage])}
    return hashlib.sha256(json.dumps(relevant, sort_keys=True).encode()).hexdigest()


def _stage_rng(cfg: Config, stage: str) -> np.random.Generator:
    return np.random.default_rng([cfg.seed, _STAGE_STREAM[stage]])


def _load_manifest(out: Path) -> dict:
    path = out / MANIFEST_JSON
    if not path.exists():
        return {"format_version": 1, "stages": {}}
    with open(path) as fh:
        return json.load(fh)


def _record_stage(cfg: Config, stage: str) -> None:
    out = Path(cfg.out_dir)
    manifest = _load_manifest(out)
    manifest["stages"][stage] = stage_fingerprint(cfg, stage)
    with open(out / MANIFEST_JSON, "w") as fh:
        json.dump(manifest, fh, indent=2)


def _require_artifact(cfg: Config, stage: str, filename: str) -> Path:
    """Path of a predecessor's artifact, verified fresh for this config."""
    out = Path(cfg.out_dir)
    path = out / filename
    if not path.exists():
        raise DataError(
            f"missing artifact {filename}: run `triprec {stage}` first")
    recorded = _load_manifest(out)["stages"].get(stage)
    if recorded != stage_fingerprint(cfg, stage):
        raise DataError(
            f"artifact {filename} is stale: stage '{stage}' ran under a"
            f" different configuration; re-run `triprec {stage}`")
    return path


def _out_dir(cfg: Config) -> Path:
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


# --------------------------------------------------------------------- stages

def cmd_ingest(cfg: Config, args) -> None:
    if not cfg.pois or not cfg.trips:
        raise ConfigError("ingest requires --pois and --trips paths")
    pois = ingest_pois(cfg.pois, cfg.flickr_format)
    trips = ingest_trips(cfg.trips, pois, cfg.tz_offset_hours, cfg.flickr_format)
    corpus = Corpus(pois, tuple(trips))
    out = _out_dir(cfg)
    save_corpus(corpus, out / CORPUS_JSON)
    _record_stage(cfg, "ingest")
    log.info("ingested %d POIs, %d trips -> %s", len(pois), len(trips),
             out / CORPUS_JSON)


def cmd_build_graph(cfg: Config, args) -> None:
    corpus = load_corpus(_require_artifact(cfg, "ingest", CORPUS_JSON))
    graph = build_base_graph(list(corpus.trips))
    graph = augment_graph(graph, corpus.pois, cfg.threshold_km)
    out = _out_dir(cfg)
    save_graph(graph, out / GRAPH_CSV)
    _record_stage(cfg, "build-graph")
    log.info("graph: %d nodes, %d directed edges -> %s", len(graph.nodes),
             len(graph.edges), out / GRAPH_CSV)


def cmd_walk(cfg: Config, args) -> None:
    graph = load_graph(_require_artifact(cfg, "build-graph", GRAPH_CSV))
    matrix = transition_matrix(graph)
    candidates = enumerate_query_candidates(graph)
    walks = generate_walk_corpus(
        matrix, candidates, m_per_query=cfg.m_per_query, alpha=cfg.alpha,
        max_attempts_per_walk=cfg.max_attempts_per_walk,
        rng=_stage_rng(cfg, "walk"))
    out = _out_dir(cfg)
    save_walks(walks, out / WALKS_TXT)
    _record_stage(cfg, "walk")
    log.info("%d walks over %d query candidates -> %s", len(walks),
             len(candidates), out / WALKS_TXT)


def _trip_vocabulary(corpus: Corpus) -> list[str]:
    return sorted({p for t in corpus.trips for p in t.poi_ids()})


def cmd_pretrain_poi(cfg: Config, args) -> None:
    corpus = load_corpus(_require_artifact(cfg, "ingest", CORPUS_JSON))
    walks = load_walks(_require_artifact(cfg, "walk", WALKS_TXT))
    tc = cfg.to_train_config()
    emb = train_poi_embeddings(
        walks, _trip_vocabulary(corpus), _stage_rng(cfg, "pretrain-poi"),
        d=tc.d, k=tc.k, epochs=tc.epochs_poi, batch_size=tc.batch_size, lr=tc.lr)
    out = _out_dir(cfg)
    emb.save(out / POI_EMB_JSON)
    emb.export_csv(out / "poi_embeddings.csv")
    _record_stage(cfg, "pretrain-poi")
    log.info("POI table %dx%d -> %s", len(emb), emb.dim, out / POI_EMB_JSON)


def _embeddings_for(cfg: Config, tc: TrainConfig, corpus: Corpus,
                    rng: np.random.Generator) -> PoiEmbeddings:
    if tc.epochs_poi > 0:
        return PoiEmbeddings.load(_require_artifact(cfg, "pretrain-poi", POI_EMB_JSON))
    vocab = _trip_vocabulary(corpus)
    from .encoders import INIT_SCALE
    return PoiEmbeddings(vocab, rng.uniform(-INIT_SCALE, INIT_SCALE,
                                            (len(vocab), tc.d)))


def cmd_warmup(cfg: Config, args) -> None:
    corpus = load_corpus(_require_artifact(cfg, "ingest", CORPUS_JSON))
    tc = cfg.to_train_config()
    rng = _stage_rng(cfg, "warmup")
    emb = _embeddings_for(cfg, tc, corpus, rng)
    model = build_model(emb, tc, rng, cfg.fingerprint())
    if tc.epochs_warmup > 0:
        contrastive_warmup(list(corpus.trips), model, rng)
    else:
        log.info("warm-up disabled (0 epochs); saving the initialized model")
    out = _out_dir(cfg)
    model.save(out / MODEL_WARMUP_JSON)
    _record_stage(cfg, "warmup")
    log.info("warmed model -> %s", out / MODEL_WARMUP_JSON)


def cmd_train(cfg: Config, args) -> None:
    corpus = load_corpus(_require_artifact(cfg, "ingest", CORPUS_JSON))
    tc = cfg.to_train_config()
    rng = _stage_rng(cfg, "train")
    if tc.epochs_warmup > 0:
        model = Model.load(_require_artifact(cfg, "warmup", MODEL_WARMUP_JSON))
    else:
        emb = _embeddings_for(cfg, tc, corpus, rng)
        model = build_model(emb, tc, rng, cfg.fingerprint())
    if tc.epochs_supervised > 0:
        supervised_train(list(corpus.trips), model, rng)
    out = _out_dir(cfg)
    model.save(out / MODEL_JSON)
    _record_stage(cfg, "train")
    log.info("trained model -> %s", out / MODEL_JSON)


def _model_trainer(cfg: Config):
    """LOOCV trainer that retrains the full pipeline per split, seeding each
    split from the held-out trip id so results do not depend on order."""
    tc = cfg.to_train_config()

    def trainer(train_corpus: Corpus, held_out):
        digest = int.from_bytes(
            hashlib.sha256(held_out.trip_id.encode()).digest()[:8], "big")
        rng = np.random.default_rng([cfg.seed, _STAGE_STREAM["evaluate"], digest])
        model = train(train_corpus, tc, rng)
        return model.recommend

    return trainer


def _model_fold_trainer(cfg: Config):
    tc = cfg.to_train_config()

    def fold_trainer(train_corpus: Corpus):
        ids = ",".join(sorted(t.trip_id for t in train_corpus.trips))
        digest = int.from_bytes(hashlib.sha256(ids.encode()).digest()[:8], "big")
        rng = np.random.default_rng([cfg.seed, _STAGE_STREAM["evaluate"], digest])
        model = train(train_corpus, tc, rng)
        return model.recommend

    return fold_trainer


def _oracle_trainer():
    def trainer(train_corpus, held_out):
        answer = held_out.poi_ids()
        return lambda query: list(answer)

    return trainer


def cmd_evaluate(cfg: Config, args) -> None:
    corpus = load_corpus(_require_artifact(cfg, "ingest", CORPUS_JSON))
    if cfg.folds >= 2:
        if cfg.trainer == "model":
            fold_trainer = _model_fold_trainer(cfg)
        elif cfg.trainer == "markov":
            base = make_markov_trainer()
            fold_trainer = lambda tc_corpus: base(tc_corpus, None)  # noqa: E731
        else:
            raise ConfigError("the oracle trainer needs exact leave-one-out (folds=0)")
        rep = evaluate_grouped(corpus, fold_trainer, cfg.folds, seed=cfg.seed)
    else:
        if cfg.trainer == "model":
            trainer = _model_trainer(cfg)
        elif cfg.trainer == "markov":
            trainer = make_markov_trainer()
        else:
            trainer = _oracle_trainer()
        rep = evaluate_loocv(corpus, trainer, jobs=cfg.jobs)
    write_report(rep, _out_dir(cfg))
    _record_stage(cfg, "evaluate")
    print(json.dumps({"mean_f1": rep.mean_f1, "mean_pairs_f1": rep.mean_pairs_f1,
                      "n_evaluated": rep.n_evaluated, "n_skipped": rep.n_skipped}))


def cmd_recommend(cfg: Config, args) -> None:
    model = Model.load(_require_artifact(cfg, "train", MODEL_JSON))
    query = Query(start_poi=args.start, start_hour=args.start_hour,
                  end_poi=args.end, end_hour=args.end_hour, n=args.n)
    trip = model.recommend(query)
    print(json.dumps({"trip": trip}))


def cmd_serve(cfg: Config, args) -> None:
    import uvicorn

    from .serve import create_app, load_state

    state = load_state(cfg.out_dir)
    app = create_app(state, cfg.cors_origins)
    log.info("serving model %s on %s:%d", state.model_version, cfg.host, cfg.port)
    uvicorn.run(app, host=cfg.host, port=cfg.port, log_level="warning")


# ----------------------------------------------------------------- arguments

_INT_FLAGS = ["seed", "jobs", "folds", "port", "d", "d_q", "hidden", "f_out",
              "batch_size", "k", "alpha", "m_per_query", "max_attempts_per_walk",
              "epochs_poi", "epochs_warmup", "epochs_supervised"]
_FLOAT_FLAGS = ["tz_offset_hours", "lr", "threshold_km", "mask_ratio",
                "cutoff_ratio", "dropout_rate"]
_STR_FLAGS = ["pois", "trips", "out_dir", "trainer", "host"]
_BOOL_FLAGS = ["flickr_format", "allow_identical_views", "finetune_v",
               "no_warmup", "no_dest_signal", "concat_query"]


def _add_config_flags(sp: argparse.ArgumentParser) -> None:
    sp.add_argument("--config", "-c", default=None, metavar="FILE",
                    help="JSON config file; flags override its values")
    for name in _INT_FLAGS:
        sp.add_argument(f"--{name.replace('_', '-')}", dest=name, type=int,
                        default=None)
    for name in _FLOAT_FLAGS:
        sp.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float,
                        default=None)
    for name in _STR_FLAGS:
        sp.add_argument(f"--{name.replace('_', '-')}", dest=name, default=None)
    for name in _BOOL_FLAGS:
        sp.add_argument(f"--{name.replace('_', '-')}", dest=name,
                        action="store_true", default=None)
    sp.add_argument("--cors-origins", dest="cors_origins", nargs="*", default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="triprec",
        description="query-driven trip recommendation pipeline")
    parser.add_argument("--log-level", default="info",
                        choices=["debug", "info", "warning", "error"])
    sub = parser.add_subparsers(dest="command", required=True)
    commands = {
        "ingest": (cmd_ingest, "read POI/visit CSVs into corpus.json"),
        "build-graph": (cmd_build_graph, "behavioral + geographic POI graph"),
        "walk": (cmd_walk, "generate the endpoint-constrained walk corpus"),
        "pretrain-poi": (cmd_pretrain_poi, "contrastive POI embedding phase"),
        "warmup": (cmd_warmup, "contrastive trip warm-up phase"),
        "train": (cmd_train, "supervised phase; writes model.json"),
        "evaluate": (cmd_evaluate, "leave-one-out evaluation report"),
        "recommend": (cmd_recommend, "answer one query from model.json"),
        "serve": (cmd_serve, "HTTP API over the trained model"),
    }
    for name, (fn, help_text) in commands.items():
        sp = sub.add_parser(name, help=help_text)
        _add_config_flags(sp)
        sp.set_defaults(func=fn)
        if name == "recommend":
            sp.add_argument("--start", required=True)
            sp.add_argument("--end", required=True)
            sp.add_argument("--start-hour", type=int, required=True)
            sp.add_argument("--end-hour", type=int, required=True)
            sp.add_argument("--n", type=int, required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level.upper()),
        format="%(levelname)s %(name)s: %(message)s")
    overrides = {name: getattr(args, name)
                 for name in _INT_FLAGS + _FLOAT_FLAGS + _STR_FLAGS + _BOOL_FLAGS
                 + ["cors_origins"]}
    try:
        cfg = load_config(args.config, overrides)
        args.func(cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 3
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 4
    return 0


if __name__ == "__main__":
    sys.exit(main())

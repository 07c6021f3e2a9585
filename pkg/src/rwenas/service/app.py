"""HTTP service exposing evaluation, complexity, search, and correlation.

The service owns the dataset: archives are loaded once and split views
are cached, so many requests (or a whole search) reuse the same arrays.
Error payloads carry the raising type, a coarse category, and
structured detail; the category maps to the HTTP status (config -> 400,
data -> 404, runtime -> 500).
"""

from __future__ import annotations

import os
import threading

from fastapi import FastAPI
from fastapi.responses import JSONResponse

from .. import __version__
from ..data import SplitData, SplitSpec, channel_stats, load_cifar10, normalize, split
from ..errors import MissingFile, RweNasError, SearchInterrupted
from ..moea import SearchConfig, history_to_dict, run_search
from ..runtime import pin_blas_single_thread
from ..rwe import EvalConfig, evaluate
from ..search_space import MacroConfig, decode, default_reductions, parse
from ..complexity import count_flops
from ..analysis import correlation_study, extract_front
from . import schemas

_STATUS = {"config": 400, "data": 404, "runtime": 500}

ENV_DATA_ROOT = "RWE_NAS_DATA"


def build_macro(settings: schemas.MacroSettings) -> MacroConfig:
    reductions = (
        frozenset(settings.reductions)
        if settings.reductions is not None
        else default_reductions(settings.layers)
    )
    return MacroConfig(
        num_layers=settings.layers,
        init_channels=settings.channels,
        reduction_positions=reductions,
        num_classes=settings.classes,
    )


def build_eval_config(
    macro: MacroConfig, settings: schemas.EvalSettings, seed: int
) -> EvalConfig:
    return EvalConfig(
        macro=macro,
        num_classifiers=settings.classifiers,
        epochs=settings.epochs,
        batch_size=settings.batch_size,
        lr0=settings.lr0,
        momentum=settings.momentum,
        seed=seed,
    )


def build_search_config(settings: schemas.SearchSettings, seed: int) -> SearchConfig:
    return SearchConfig(
        pop_size=settings.pop,
        generations=settings.generations,
        crossover_prob=settings.crossover_prob,
        gene_mutation_prob=settings.mutation_prob,
        eta_m=settings.eta_m,
        seed=seed,
    )


def resolved_config(
    seed: int,
    macro: schemas.MacroSettings,
    eval_settings: schemas.EvalSettings,
    data: schemas.DataSettings,
    root: str | None,
    search: schemas.SearchSettings | None = None,
) -> dict:
    """Run-defining settings only: thread counts and output paths are
    execution details and deliberately excluded, so two runs of the
    same configuration serialize identically."""
    macro_cfg = build_macro(macro)
    out = {
        "seed": seed,
        "macro": {
            "layers": macro.layers,
            "channels": macro.channels,
            "reductions": sorted(macro_cfg.reduction_positions),
            "classes": macro.classes,
        },
        "eval": {
            "classifiers": eval_settings.classifiers,
            "epochs": eval_settings.epochs,
            "batch_size": eval_settings.batch_size,
            "lr0": eval_settings.lr0,
            "momentum": eval_settings.momentum,
        },
        "data": {
            "root": root,
            "train_fraction": data.train_fraction,
            "subsample": list(data.subsample) if data.subsample else None,
            "split_seed": data.split_seed,
        },
    }
    if search is not None:
        out["search"] = {
            "pop": search.pop,
            "generations": search.generations,
            "crossover_prob": search.crossover_prob,
            "mutation_prob": search.mutation_prob,
            "eta_m": search.eta_m,
        }
    return out


class DatasetStore:
    """Loads archives lazily and caches raw sets, stats, and splits."""

    def __init__(self, default_root: str | None):
        self.default_root = default_root
        self._lock = threading.Lock()
        self._raw: dict[str, tuple] = {}
        self._splits: dict[tuple, SplitData] = {}

    def resolve_root(self, requested: str | None) -> str:
        root = requested or self.default_root
        if not root:
            raise MissingFile(f"(no dataset root: pass one or set {ENV_DATA_ROOT})")
        return root

    def _raw_train(self, root: str):
        if root not in self._raw:
            train = load_cifar10(root, split="train")
            self._raw[root] = (train, channel_stats(train))
        return self._raw[root]

    def get_split(self, settings: schemas.DataSettings) -> SplitData:
        root = self.resolve_root(settings.root)
        subsample = tuple(settings.subsample) if settings.subsample else None
        key = (root, settings.train_fraction, subsample, settings.split_seed)
        with self._lock:
            if key not in self._splits:
                train, (mean, std) = self._raw_train(root)
                spec = SplitSpec(
                    train_fraction=settings.train_fraction,
                    subsample=subsample,
                    seed=settings.split_seed,
                )
                raw = split(train, spec)
                self._splits[key] = SplitData(
                    train=normalize(raw.train, mean, std),
                    validation=normalize(raw.validation, mean, std),
                )
            return self._splits[key]


def create_app(
    data_root: str | None = None, cancel_event: threading.Event | None = None
) -> FastAPI:
    """Build the application.

    `data_root` defaults to the RWE_NAS_DATA environment variable.
    `cancel_event`, when set mid-search, stops the run at the next
    generation boundary and returns the partial history.
    """
    pin_blas_single_thread()
    app = FastAPI(title="rwe-nas", version=__version__)
    store = DatasetStore(data_root or os.environ.get(ENV_DATA_ROOT) or None)
    app.state.store = store

    @app.exception_handler(RweNasError)
    async def _on_error(request, exc: RweNasError):
        return JSONResponse(
            status_code=_STATUS.get(exc.category, 500),
            content={
                "error": type(exc).__name__,
                "category": exc.category,
                "message": str(exc),
                "detail": exc.detail(),
            },
        )

    @app.get("/health", response_model=schemas.HealthResponse)
    def health():
        return schemas.HealthResponse(status="ok", version=__version__)

    @app.post("/flops", response_model=schemas.FlopsResponse)
    def flops(request: schemas.FlopsRequest):
        plan = decode(parse(request.genome), build_macro(request.macro))
        report = count_flops(plan)
        return schemas.FlopsResponse(**report.as_dict())

    @app.post("/evaluate", response_model=schemas.EvaluateResponse)
    def evaluate_genome(request: schemas.EvaluateRequest):
        genome = parse(request.genome)
        macro = build_macro(request.macro)
        config = build_eval_config(macro, request.eval, request.seed)
        datasets = store.get_split(request.data)
        result = evaluate(genome, datasets, config)
        root = store.resolve_root(request.data.root)
        return schemas.EvaluateResponse(
            error=result.error,
            flops=result.flops,
            wall_time_s=result.wall_time_s,
            config=resolved_config(request.seed, request.macro, request.eval, request.data, root),
        )

    @app.post("/search", response_model=schemas.SearchResponse)
    def search(request: schemas.SearchRequest):
        macro = build_macro(request.macro)
        eval_config = build_eval_config(macro, request.eval, request.seed)
        search_config = build_search_config(request.search, request.seed)
        datasets = store.get_split(request.data)
        root = store.resolve_root(request.data.root)

        def on_generation(snapshot):
            if cancel_event is not None and cancel_event.is_set():
                raise KeyboardInterrupt

        interrupted = False
        try:
            history = run_search(
                search_config,
                eval_config,
                datasets,
                n_threads=request.threads,
                on_generation=on_generation,
            )
        except SearchInterrupted as stop:
            history = stop.history
            interrupted = True
        config = resolved_config(
            request.seed, request.macro, request.eval, request.data, root, request.search
        )
        front = []
        if history.snapshots:
            front = [
                schemas.FrontEntry(genome=list(g), error=e, flops=f)
                for g, e, f in extract_front(history)
            ]
        return schemas.SearchResponse(
            history=history_to_dict(history, config, __version__),
            front=front,
            interrupted=interrupted,
        )

    @app.post("/correlate", response_model=schemas.CorrelateResponse)
    def correlate(request: schemas.CorrelateRequest):
        report = correlation_study(
            request.predictions, request.truth, request.truth_provenance
        )
        return schemas.CorrelateResponse(**report.as_dict())

    return app

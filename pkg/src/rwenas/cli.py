"""Command-line client for the search service.

Subcommands: serve, search, evaluate, flops, correlate.  By default the
client talks to an in-process instance of the service; --server points
it at a remote one instead.  stdout carries machine-readable JSON only;
progress and diagnostics go to stderr.  Exit codes: 0 success, 1
configuration error, 2 data error, 3 runtime error or interruption.

Settings resolve in precedence order: built-in defaults, then the named
profile, then the config file (flat `key = value` lines, `#` comments),
then explicit flags.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import signal
import sys
import threading
import warnings

import httpx

from . import __version__
from .analysis import read_scores_csv
from .errors import RweNasError
from .runtime import pin_blas_single_thread
from .search_space import GENOME_LENGTH, parse
from .service.app import ENV_DATA_ROOT, create_app

EXIT_CONFIG, EXIT_DATA, EXIT_RUNTIME = 1, 2, 3
_EXIT_BY_CATEGORY = {"config": EXIT_CONFIG, "data": EXIT_DATA, "runtime": EXIT_RUNTIME}


def _fail(code: int, message: str):
    print(f"error: {message}", file=sys.stderr)
    raise SystemExit(code)


# ---------------------------------------------------------------------------
# settings

def _cast_int(value: str) -> int:
    return int(value)


def _cast_float(value: str) -> float:
    return float(value)


def _cast_str(value: str) -> str:
    return value


def _cast_pair(value: str):
    if value.strip().lower() == "none":
        return None
    parts = [int(p) for p in value.replace(",", " ").split()]
    if len(parts) != 2:
        raise ValueError(f"expected two integers, got {value!r}")
    return (parts[0], parts[1])


def _cast_int_list(value: str):
    if value.strip().lower() == "none":
        return None
    return [int(p) for p in value.replace(",", " ").split()]


_CASTERS = {
    "seed": _cast_int,
    "pop": _cast_int,
    "generations": _cast_int,
    "crossover_prob": _cast_float,
    "mutation_prob": _cast_float,
    "eta_m": _cast_float,
    "layers": _cast_int,
    "channels": _cast_int,
    "reductions": _cast_int_list,
    "classes": _cast_int,
    "classifiers": _cast_int,
    "epochs": _cast_int,
    "batch_size": _cast_int,
    "lr0": _cast_float,
    "momentum": _cast_float,
    "data": _cast_str,
    "train_fraction": _cast_float,
    "subsample": _cast_pair,
    "split_seed": _cast_int,
    "out": _cast_str,
    "threads": _cast_int,
}

_DEFAULTS = {
    "seed": 0,
    "pop": 20,
    "generations": 30,
    "crossover_prob": 0.9,
    "mutation_prob": 1.0 / GENOME_LENGTH,
    "eta_m": 20.0,
    "layers": 5,
    "channels": 10,
    "reductions": None,
    "classes": 10,
    "classifiers": 5,
    "epochs": 30,
    "batch_size": 512,
    "lr0": 0.25,
    "momentum": 0.9,
    "data": None,
    "train_fraction": 0.8,
    "subsample": None,
    "split_seed": 0,
    "out": ".",
    "threads": 1,
}

# tiny: the full pipeline on a stratified 4000/1000 subsample
PROFILES = {
    "default": {},
    "tiny": {"subsample": (4000, 1000)},
}


def parse_config_file(path: str) -> dict:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        _fail(EXIT_CONFIG, f"cannot read config file {path}: {exc}")
    out = {}
    for line_no, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip(), value.strip()
        if not sep or not key or not value:
            _fail(EXIT_CONFIG, f"{path}:{line_no}: expected 'key = value'")
        if key not in _CASTERS:
            _fail(EXIT_CONFIG, f"{path}:{line_no}: unknown setting {key!r}")
        try:
            out[key] = _CASTERS[key](value)
        except ValueError as exc:
            _fail(EXIT_CONFIG, f"{path}:{line_no}: bad value for {key}: {exc}")
    return out


def resolve_settings(args: argparse.Namespace) -> dict:
    settings = dict(_DEFAULTS)
    profile = getattr(args, "profile", None) or "default"
    if profile not in PROFILES:
        _fail(EXIT_CONFIG, f"unknown profile {profile!r} (choose from {sorted(PROFILES)})")
    settings.update(PROFILES[profile])
    config_path = getattr(args, "config", None)
    if config_path:
        settings.update(parse_config_file(config_path))
    for key in _CASTERS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    if settings["data"] is None:
        settings["data"] = os.environ.get(ENV_DATA_ROOT) or None
    return settings


def _macro_payload(s: dict) -> dict:
    return {
        "layers": s["layers"],
        "channels": s["channels"],
        "reductions": list(s["reductions"]) if s["reductions"] else None,
        "classes": s["classes"],
    }


def _eval_payload(s: dict) -> dict:
    return {
        "classifiers": s["classifiers"],
        "epochs": s["epochs"],
        "batch_size": s["batch_size"],
        "lr0": s["lr0"],
        "momentum": s["momentum"],
    }


def _data_payload(s: dict) -> dict:
    return {
        "root": s["data"],
        "train_fraction": s["train_fraction"],
        "subsample": list(s["subsample"]) if s["subsample"] else None,
        "split_seed": s["split_seed"],
    }


def _search_payload(s: dict) -> dict:
    return {
        "pop": s["pop"],
        "generations": s["generations"],
        "crossover_prob": s["crossover_prob"],
        "mutation_prob": s["mutation_prob"],
        "eta_m": s["eta_m"],
    }


# ---------------------------------------------------------------------------
# transport

class ServiceClient:
    """POSTs against a remote service or an in-process application."""

    def __init__(self, server: str | None, data_root: str | None = None,
                 cancel_event: threading.Event | None = None):
        if server:
            self._client = httpx.Client(base_url=server, timeout=None)
        else:
            with warnings.catch_warnings():
                # cosmetic upstream deprecation; keep stderr for our own output
                warnings.filterwarnings(
                    "ignore",
                    message="Using `httpx` with `starlette.testclient` is deprecated",
                )
                from fastapi.testclient import TestClient

            self._client = TestClient(create_app(data_root, cancel_event))

    def post(self, path: str, payload: dict) -> dict:
        try:
            response = self._client.post(path, json=payload)
        except httpx.HTTPError as exc:
            _fail(EXIT_RUNTIME, f"cannot reach service: {exc}")
        if response.status_code == 200:
            return response.json()
        try:
            body = response.json()
        except ValueError:
            body = {}
        code = _EXIT_BY_CATEGORY.get(body.get("category"))
        if code is None:
            status = response.status_code
            code = EXIT_CONFIG if status in (400, 422) else EXIT_DATA if status == 404 else EXIT_RUNTIME
        message = body.get("message") or json.dumps(body.get("detail", response.text))
        _fail(code, message)


# ---------------------------------------------------------------------------
# artifact writers

def _format_number(value) -> str:
    if isinstance(value, bool):
        raise ValueError("not a number")
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float) and value == int(value) and abs(value) < 2**53:
        return str(int(value))
    return repr(value)


def write_canonical_json(path: str, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_front_csv(path: str, front: list[dict]) -> None:
    lines = ["genome,error,flops"]
    for entry in front:
        genome = " ".join(str(v) for v in entry["genome"])
        lines.append(
            f"{genome},{_format_number(entry['error'])},{_format_number(entry['flops'])}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _generation_front(individuals: list[dict]) -> list[tuple]:
    seen = set()
    points = []
    for ind in individuals:
        if ind["rank"] != 0:
            continue
        key = (ind["flops"], ind["error"])
        if key in seen:
            continue
        seen.add(key)
        points.append(key)
    points.sort()
    return points


def write_front_plot_csv(path: str, history: dict) -> None:
    """Two-column (flops, error) front per generation, blocks separated
    by a `# generation N` comment line and a blank line."""
    lines = ["flops,error"]
    for gen in history["generations"]:
        lines.append(f"# generation {gen['generation']}")
        for flops, error in _generation_front(gen["individuals"]):
            lines.append(f"{_format_number(flops)},{_format_number(error)}")
        lines.append("")
    with open(path, "w") as fh:
        fh.write("\n".join(lines).rstrip("\n") + "\n")


# ---------------------------------------------------------------------------
# subcommands

def read_genome_file(path: str) -> list[int]:
    """One line of 40 space-separated integers; validated client-side."""
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        _fail(EXIT_CONFIG, f"cannot read genome file {path}: {exc}")
    try:
        values = [int(token) for token in text.split()]
    except ValueError as exc:
        _fail(EXIT_CONFIG, f"{path}: {exc}")
    try:
        parse(values)
    except RweNasError as exc:
        _fail(EXIT_CONFIG, f"{path}: {exc}")
    return values


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


def cmd_search(args: argparse.Namespace) -> int:
    settings = resolve_settings(args)
    payload = {
        "seed": settings["seed"],
        "search": _search_payload(settings),
        "macro": _macro_payload(settings),
        "eval": _eval_payload(settings),
        "data": _data_payload(settings),
        "threads": settings["threads"],
    }
    cancel = threading.Event()
    presses = 0

    def on_sigint(signum, frame):
        nonlocal presses
        presses += 1
        if presses > 1:
            raise KeyboardInterrupt
        cancel.set()
        print("interrupt: stopping at the next generation boundary", file=sys.stderr)

    client = ServiceClient(args.server, settings["data"], cancel)
    previous = signal.getsignal(signal.SIGINT)
    signal.signal(signal.SIGINT, on_sigint)
    try:
        response = client.post("/search", payload)
    except KeyboardInterrupt:
        _fail(EXIT_RUNTIME, "search aborted before any result was returned")
    finally:
        signal.signal(signal.SIGINT, previous)

    history = response["history"]
    for gen in history["generations"]:
        front = _generation_front(gen["individuals"])
        best_error = min((ind["error"] for ind in gen["individuals"]), default=math.nan)
        min_flops = min((ind["flops"] for ind in gen["individuals"]), default=math.nan)
        print(
            f"generation {gen['generation']}: evaluations {gen['evaluations']}, "
            f"cache hits {gen['cache_hits']}, front size {len(front)}, "
            f"best error {best_error}, min flops {min_flops}",
            file=sys.stderr,
        )

    out_dir = settings["out"]
    os.makedirs(out_dir, exist_ok=True)
    history_path = os.path.join(out_dir, "history.json")
    front_path = os.path.join(out_dir, "front.csv")
    plot_path = os.path.join(out_dir, "front_plot.csv")
    write_canonical_json(history_path, history)
    write_front_csv(front_path, response["front"])
    write_front_plot_csv(plot_path, history)
    _emit(
        {
            "out": out_dir,
            "generations": len(history["generations"]) - 1,
            "front_size": len(response["front"]),
            "interrupted": response.get("interrupted", False),
            "files": {
                "history": history_path,
                "front": front_path,
                "front_plot": plot_path,
            },
        }
    )
    return EXIT_RUNTIME if response.get("interrupted") else 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    settings = resolve_settings(args)
    genome = read_genome_file(args.genome_file)
    payload = {
        "genome": genome,
        "seed": settings["seed"],
        "macro": _macro_payload(settings),
        "eval": _eval_payload(settings),
        "data": _data_payload(settings),
    }
    client = ServiceClient(args.server, settings["data"])
    response = client.post("/evaluate", payload)
    _emit({"genome": genome, **response})
    return 0


def cmd_flops(args: argparse.Namespace) -> int:
    settings = resolve_settings(args)
    genome = read_genome_file(args.genome_file)
    payload = {"genome": genome, "macro": _macro_payload(settings)}
    client = ServiceClient(args.server)
    response = client.post("/flops", payload)
    if getattr(args, "out", None):
        os.makedirs(args.out, exist_ok=True)
        write_canonical_json(os.path.join(args.out, "complexity.json"), response)
    _emit({"genome": genome, **response})
    return 0


def cmd_correlate(args: argparse.Namespace) -> int:
    for path in (args.predictions, args.truth):
        if not os.path.isfile(path):
            _fail(EXIT_DATA, f"missing file: {path}")
    try:
        predictions = read_scores_csv(args.predictions)
        truth = read_scores_csv(args.truth)
    except RweNasError as exc:
        _fail(EXIT_CONFIG, str(exc))
    payload = {
        "predictions": predictions,
        "truth": truth,
        "truth_provenance": os.path.basename(args.truth),
    }
    client = ServiceClient(args.server)
    response = client.post("/correlate", payload)
    if getattr(args, "out", None):
        os.makedirs(args.out, exist_ok=True)
        write_canonical_json(os.path.join(args.out, "correlation.json"), response)
        plot_lines = ["predicted,ground_truth"]
        plot_lines += [
            f"{_format_number(p['predicted'])},{_format_number(p['ground_truth'])}"
            for p in response["pairs"]
        ]
        with open(os.path.join(args.out, "correlation_plot.csv"), "w") as fh:
            fh.write("\n".join(plot_lines) + "\n")
    _emit(response)
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    app = create_app(args.data)
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


# ---------------------------------------------------------------------------
# parser

class _Parser(argparse.ArgumentParser):
    # usage mistakes are configuration errors: exit 1, never argparse's 2
    def error(self, message):
        _fail(EXIT_CONFIG, message)


def _add_settings_flags(sub: argparse.ArgumentParser, search_flags: bool = True):
    sub.add_argument("--config", help="flat key = value settings file")
    sub.add_argument("--profile", choices=sorted(PROFILES), help="named preset (default, tiny)")
    sub.add_argument("--seed", type=int)
    sub.add_argument("--data", help=f"dataset root (default: ${ENV_DATA_ROOT})")
    sub.add_argument("--layers", type=int)
    sub.add_argument("--channels", type=int)
    sub.add_argument("--reductions", type=_cast_int_list, metavar="I,J")
    sub.add_argument("--classes", type=int)
    sub.add_argument("--classifiers", type=int)
    sub.add_argument("--epochs", type=int)
    sub.add_argument("--batch-size", type=int)
    sub.add_argument("--lr0", type=float)
    sub.add_argument("--momentum", type=float)
    sub.add_argument("--train-fraction", type=float)
    sub.add_argument("--subsample", type=_cast_pair, metavar="TRAIN,VAL")
    sub.add_argument("--split-seed", type=int)
    if search_flags:
        sub.add_argument("--pop", type=int)
        sub.add_argument("--generations", type=int)
        sub.add_argument("--crossover-prob", type=float)
        sub.add_argument("--mutation-prob", type=float)
        sub.add_argument("--eta-m", type=float)
        sub.add_argument("--threads", type=int)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="rwe-nas", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    commands = parser.add_subparsers(dest="command", required=True)

    search = commands.add_parser("search", help="run the bi-objective search")
    _add_settings_flags(search)
    search.add_argument("--out", help="artifact directory (default: current)")
    search.add_argument("--server", help="remote service URL (default: in-process)")
    search.set_defaults(func=cmd_search)

    evaluate = commands.add_parser("evaluate", help="score one genome")
    evaluate.add_argument("genome_file", help="file with 40 space-separated integers")
    _add_settings_flags(evaluate, search_flags=False)
    evaluate.add_argument("--server")
    evaluate.set_defaults(func=cmd_evaluate)

    flops = commands.add_parser("flops", help="exact complexity of one genome")
    flops.add_argument("genome_file")
    _add_settings_flags(flops, search_flags=False)
    flops.add_argument("--out", help="also write complexity.json here")
    flops.add_argument("--server")
    flops.set_defaults(func=cmd_flops)

    correlate = commands.add_parser("correlate", help="rank-correlate two score files")
    correlate.add_argument("--predictions", required=True, help="CSV: id,accuracy")
    correlate.add_argument("--truth", required=True, help="CSV: id,accuracy")
    correlate.add_argument("--out", help="also write correlation artifacts here")
    correlate.add_argument("--server")
    correlate.set_defaults(func=cmd_correlate)

    serve = commands.add_parser("serve", help="run the HTTP service")
    serve.add_argument("--data", help=f"dataset root (default: ${ENV_DATA_ROOT})")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    pin_blas_single_thread()
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except RweNasError as exc:
        _fail(_EXIT_BY_CATEGORY.get(exc.category, EXIT_RUNTIME), str(exc))
    except KeyboardInterrupt:
        _fail(EXIT_RUNTIME, "interrupted")


if __name__ == "__main__":
    sys.exit(main())

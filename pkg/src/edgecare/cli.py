"""simctl: run, replay and serve scenarios.

    simctl run --config scenario.json [--seed N] [--duration MS] [--out DIR]
    simctl replay RUN_DIR [--check]
    simctl serve --config scenario.json --port 8700 [--pace 10]

Run output is a self-describing directory: trace.jsonl (every processed
event), metrics.json (pure function of the trace) and config.resolved.json
(the fully defaulted scenario).  All files are written atomically; any
invariant violation during a run exits non-zero.

SIMCTL_LOG_LEVEL selects error/info/debug logging.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from pathlib import Path

from .kernel import InvariantViolation
from .metrics import CorruptTrace, metrics_from_lines, metrics_json
from .runtime import SimRuntime
from .scenario import ConfigError, canonical_config_json, load_config

log = logging.getLogger("simctl")


def _setup_logging():
    level = os.environ.get("SIMCTL_LOG_LEVEL", "info").lower()
    levels = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}
    logging.basicConfig(level=levels.get(level, logging.INFO),
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")


def _atomic_write(path: Path, data: str):
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(data, encoding="utf-8")
    os.replace(tmp, path)


def run_scenario(config_path: str, out_dir: str, seed: int | None = None,
                 duration_ms: int | None = None) -> Path:
    """Headless run; returns the run directory."""
    cfg = load_config(config_path)
    if seed is not None:
        cfg["seed"] = seed
    if duration_ms is not None:
        cfg["duration_ms"] = duration_ms
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)

    trace_tmp = out / "trace.jsonl.tmp"
    with trace_tmp.open("w", encoding="utf-8") as fh:
        rt = SimRuntime(cfg, trace_sink=lambda line: fh.write(line + "\n"))
        summary = rt.run()
    os.replace(trace_tmp, out / "trace.jsonl")
    _atomic_write(out / "config.resolved.json", canonical_config_json(cfg))
    _atomic_write(out / "metrics.json",
                  metrics_json(metrics_from_lines(rt.sim.trace_lines)))
    log.info("run complete: %d events, clock=%d ms, out=%s",
             summary.events_processed, summary.final_clock, out)
    return out


def replay_run(run_dir: str) -> str:
    """Recompute metrics from a run's trace; read-only."""
    trace_path = Path(run_dir) / "trace.jsonl"
    if not trace_path.exists():
        raise CorruptTrace("trace.jsonl not found", 0)
    with trace_path.open("r", encoding="utf-8") as fh:
        return metrics_json(metrics_from_lines(fh))


def _cmd_run(args) -> int:
    out = args.out or f"runs/{Path(args.config).stem}"
    run_scenario(args.config, out, seed=args.seed, duration_ms=args.duration)
    print(out)
    return 0


def _cmd_replay(args) -> int:
    recomputed = replay_run(args.run_dir)
    if args.check:
        stored = (Path(args.run_dir) / "metrics.json").read_text(encoding="utf-8")
        if stored != recomputed:
            print("metrics mismatch: replay differs from stored metrics.json",
                  file=sys.stderr)
            return 1
        print("ok: replayed metrics are byte-identical")
        return 0
    sys.stdout.write(recomputed)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn
    from .server import make_app

    cfg = load_config(args.config)
    if args.seed is not None:
        cfg["seed"] = args.seed
    rt = SimRuntime(cfg, live=True)
    app = make_app(rt, pace=args.pace, console_dir=args.console)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def main(argv=None) -> int:
    _setup_logging()
    parser = argparse.ArgumentParser(prog="simctl", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute a scenario headless")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int, default=None)
    p_run.add_argument("--duration", type=int, default=None, metavar="MS")
    p_run.add_argument("--out", default=None)
    p_run.set_defaults(func=_cmd_run)

    p_replay = sub.add_parser("replay", help="recompute metrics from a trace")
    p_replay.add_argument("run_dir")
    p_replay.add_argument("--check", action="store_true",
                          help="compare against the stored metrics.json")
    p_replay.set_defaults(func=_cmd_replay)

    p_serve = sub.add_parser("serve", help="live run with the steering API")
    p_serve.add_argument("--config", required=True)
    p_serve.add_argument("--port", type=int, required=True)
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--pace", type=float, default=10.0,
                         help="virtual ms per wall ms (default 10)")
    p_serve.add_argument("--seed", type=int, default=None)
    p_serve.add_argument("--console", default=None, metavar="DIR",
                         help="serve a built web console from DIR at /console")
    p_serve.set_defaults(func=_cmd_serve)

    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except CorruptTrace as err:
        print(f"corrupt trace: {err}", file=sys.stderr)
        return 2
    except InvariantViolation as err:
        print(f"invariant violation: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

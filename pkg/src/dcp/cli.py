"""Command-line front end.

A thin client of the service layer: subcommands build the same pydantic
requests the HTTP endpoints accept and call the handlers in process (or POST
them to a running server with --server).  Exit codes: 0 success, 2 usage,
3 data, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import pydantic

from . import io, service
from .errors import DataFormatError, InvalidArgumentError, NumericError, SingularDesignError
from .schemas import (BenchRequest, CommonConfig, DataPayload, RunConfig,
                      RunRequest, SimulateRequest)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(EXIT_USAGE)


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha", type=float, default=0.1, help="miscoverage level")
    p.add_argument("--split-frac", type=float, default=0.5,
                   help="share of training data used for fitting vs calibration")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--bins", type=int, default=20, help="conditioning bins in reports")
    p.add_argument("--tau-points", type=int, default=999,
                   help="quantile grid size for the CDF estimators")
    p.add_argument("--tau-trim", type=float, default=0.001)
    p.add_argument("--trial-points", type=int, default=1000,
                   help="outcome grid size for interval construction")
    p.add_argument("--time-ordered", action="store_true",
                   help="treat rows as a time series (rolling evaluation)")
    p.add_argument("--dr-link", choices=["logit", "probit"], default="logit")
    p.add_argument("--dr-levels", type=int, default=99)
    p.add_argument("--input", required=True, help="input CSV (y, x1..xp)")
    p.add_argument("--output", help="output JSON path (stdout if omitted)")
    p.add_argument("--server", help="base URL of a running service; "
                                    "when omitted the work runs in process")


def build_parser() -> _Parser:
    parser = _Parser(prog="dcp", description="Conditional prediction intervals: "
                                             "simulate data, run coverage reports, "
                                             "benchmark methods, serve models.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="write a simulated dataset as CSV")
    p_sim.add_argument("--dgp", required=True,
                       choices=["location_scale", "skewed_exponential", "ar_garch_like"])
    p_sim.add_argument("--t", type=int, required=True, help="number of rows")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.add_argument("--output", required=True, help="output CSV path")
    p_sim.add_argument("--server", help="base URL of a running service")

    p_run = sub.add_parser("run", help="evaluate one method on a CSV dataset")
    p_run.add_argument("--method", required=True)
    _add_config_flags(p_run)

    p_bench = sub.add_parser("bench", help="compare several methods on one dataset")
    p_bench.add_argument("--methods", required=True,
                         help="comma-separated method names")
    _add_config_flags(p_bench)

    p_serve = sub.add_parser("serve", help="start the HTTP service")
    p_serve.add_argument("--host", default="127.0.0.1")
    p_serve.add_argument("--port", type=int, default=8000)
    return parser


def _config_kwargs(args) -> dict:
    return dict(alpha=args.alpha, split_frac=args.split_frac, seed=args.seed,
                tau_points=args.tau_points, tau_trim=args.tau_trim,
                trial_points=args.trial_points, n_bins=args.bins,
                time_ordered=args.time_ordered, dr_link=args.dr_link,
                dr_levels=args.dr_levels)


def _post(server: str, route: str, payload: dict) -> dict:
    import httpx

    resp = httpx.post(server.rstrip("/") + route, json=payload, timeout=600.0)
    if resp.status_code in (400, 422):
        raise InvalidArgumentError(f"server rejected request: {resp.text}")
    if resp.status_code != 200:
        raise NumericError(f"server error {resp.status_code}: {resp.text}")
    return resp.json()


def _emit_json(args, payload: dict) -> None:
    text = io.report_json_text(payload)
    if args.output:
        io.write_text_atomic(args.output, text)
    else:
        sys.stdout.write(text)


def _emit_bins(args, bins: list[dict]) -> None:
    if args.output:
        path = Path(args.output)
        io.write_text_atomic(path.with_suffix(path.suffix + ".bins.csv"),
                             io.bins_csv_text(bins))


def cmd_simulate(args) -> int:
    req = SimulateRequest(dgp=args.dgp, t=args.t, seed=args.seed)
    if args.server:
        out = _post(args.server, "/simulate", req.model_dump())
        columns, rows = out["columns"], out["rows"]
    else:
        resp = service.simulate_payload(req)
        columns, rows = resp.columns, resp.rows
    io.write_text_atomic(args.output, io.dataset_csv_text(columns, rows))
    return EXIT_OK


def cmd_run(args) -> int:
    config = RunConfig(method=args.method, **_config_kwargs(args))
    data = io.read_dataset_csv(args.input, time_ordered=args.time_ordered)
    req = RunRequest(config=config, data=DataPayload.from_dataset(data))
    if args.server:
        payload = _post(args.server, "/run", req.model_dump())
    else:
        payload = service.run_report(req).model_dump()
    _emit_json(args, payload)
    _emit_bins(args, payload["bins"])
    return EXIT_OK


def cmd_bench(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    if not methods:
        print("dcp: error: --methods must name at least one method", file=sys.stderr)
        return EXIT_USAGE
    config = CommonConfig(**_config_kwargs(args))
    data = io.read_dataset_csv(args.input, time_ordered=args.time_ordered)
    req = BenchRequest(methods=methods, config=config,
                       data=DataPayload.from_dataset(data))
    if args.server:
        payload = _post(args.server, "/bench", req.model_dump())
    else:
        payload = service.bench_report(req).model_dump()
    _emit_json(args, payload)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run(service.app, host=args.host, port=args.port)
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"simulate": cmd_simulate, "run": cmd_run,
                "bench": cmd_bench, "serve": cmd_serve}
    try:
        return handlers[args.command](args)
    except pydantic.ValidationError as exc:
        print(f"dcp: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataFormatError as exc:
        print(f"dcp: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except InvalidArgumentError as exc:
        print(f"dcp: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (SingularDesignError, NumericError) as exc:
        print(f"dcp: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"dcp: i/o error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

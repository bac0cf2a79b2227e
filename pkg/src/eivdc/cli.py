"""Thin command-line client for the estimation service.

Every command builds a JSON request and sends it to the service: by
default an in-process instance of the FastAPI app (no network), or a
running server when ``--server URL`` is given.  All randomness flows from
``--seed``; when omitted, a fresh seed is generated and printed for
replay.

Exit codes: 0 ok, 2 usage, 3 data error, 4 estimation degeneracy,
5 calibration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .rng import fresh_seed

EXIT_CODES = {"usage": 2, "data": 3, "degeneracy": 4, "calibration": 5}

_DGP_FIELDS = (
    "n", "T", "beta", "gamma", "shape_u", "shape_e", "shape_v_xi", "shape_v_z",
    "scale", "phi_xi", "phi_z", "delta_xi", "delta_z", "tau_sq",
    "c11", "c21", "c22", "mu_y", "sigma_y_sq", "burn_in",
)


class CommandError(Exception):
    def __init__(self, message: str, exit_code: int):
        super().__init__(message)
        self.exit_code = exit_code


class ServiceClient:
    """HTTP-shaped access to the service, in-process unless --server is set."""

    def __init__(self, server: str | None = None):
        if server:
            import httpx

            self._client = httpx.Client(base_url=server, timeout=None)
        else:
            from fastapi.testclient import TestClient

            from .service.app import create_app

            self._client = TestClient(create_app())

    def post(self, path: str, payload: dict) -> dict:
        response = self._client.post(path, json=payload)
        if response.status_code == 200:
            return response.json()
        try:
            body = response.json()
        except ValueError:
            raise CommandError(f"service error {response.status_code}", 1) from None
        if response.status_code == 422:  # request model validation
            raise CommandError(f"[usage] invalid request: {body.get('detail')}", 2)
        error_class = body.get("error_class", "data")
        raise CommandError(
            f"[{error_class}] {body.get('message', 'service error')}",
            EXIT_CODES.get(error_class, 1),
        )


def _schema_payload(args) -> dict:
    z = [c for c in (args.z_cols or "").split(",") if c]
    return {"firm": args.firm_col, "year": args.year_col,
            "y": args.y_col, "x": args.x_col, "z": z}


def _read_input(path: str) -> str:
    p = Path(path)
    if not p.exists():
        raise CommandError(f"[data] input file not found: {path}", EXIT_CODES["data"])
    return p.read_text()


def _resolve_seed(args) -> int:
    if args.seed is not None:
        return args.seed
    seed = fresh_seed()
    print(f"seed: {seed} (generated; pass --seed {seed} to replay)")
    return seed


def _dgp_payload(args) -> dict:
    return {f: getattr(args, f) for f in _DGP_FIELDS if getattr(args, f, None) is not None}


def _add_schema_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--firm-col", default="firm", help="firm id column name")
    p.add_argument("--year-col", default="year")
    p.add_argument("--y-col", default="y")
    p.add_argument("--x-col", default="x")
    p.add_argument("--z-cols", default="", help="comma-separated control columns")


def _add_dgp_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--n", type=int, default=None, help="cross-section size")
    p.add_argument("--T", type=int, default=None, help="number of years")
    p.add_argument("--beta", type=float, default=None)
    p.add_argument("--gamma", type=float, default=None)
    p.add_argument("--mu-y", dest="mu_y", type=float, default=None)
    p.add_argument("--sigma-y-sq", dest="sigma_y_sq", type=float, default=None)
    p.add_argument("--tau-sq", dest="tau_sq", type=float, default=None)
    for name in ("shape_u", "shape_e", "shape_v_xi", "shape_v_z", "scale",
                 "phi_xi", "phi_z", "delta_xi", "delta_z",
                 "c11", "c21", "c22"):
        p.add_argument(f"--{name.replace('_', '-')}", dest=name, type=float, default=None)
    p.add_argument("--burn-in", dest="burn_in", type=int, default=None)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="eivdc",
        description="Error-in-variables estimation: simulate, estimate, "
                    "Monte Carlo studies, expanding windows.",
    )
    parser.add_argument("--config", default=None,
                        help="key=value file supplying flag defaults")
    parser.add_argument("--server", default=None,
                        help="URL of a running service (default: in-process)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a simulated panel as CSV")
    _add_dgp_flags(p)
    _add_schema_flags(p)
    p.add_argument("--first-year", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", "-o", default="panel.csv")

    p = sub.add_parser("estimate", help="estimate a model on a panel CSV")
    p.add_argument("--input", "-i", required=True)
    _add_schema_flags(p)
    p.add_argument("--method", choices=["ols", "3m", "dc"], default="dc")
    p.add_argument("--blocks-per-year", type=int, default=None)
    p.add_argument("--fe", action="store_true", help="firm fixed effects")
    p.add_argument("--te", action="store_true", help="time effects")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--bootstrap-draws", type=int, default=399)
    p.add_argument("--partition-mode", choices=["random", "adjacent"], default="random")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", "-o", default=None, help="write the JSON report here")

    p = sub.add_parser("mc", help="run a Monte Carlo study")
    _add_dgp_flags(p)
    p.add_argument("--reps", type=int, default=500)
    p.add_argument("--methods", default="ols,3m,dc2",
                   help="comma list: ols, 3m, dc<N> (N blocks per year)")
    p.add_argument("--specs", default="1", help="comma list from 1..4")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--bootstrap-draws", type=int, default=399)
    p.add_argument("--partition-mode", choices=["random", "adjacent"], default="random")
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--paper-scale", action="store_true",
                   help="full-scale design (n=3000, T=20, 20000 reps; hours)")
    p.add_argument("--output", "-o", default="mc_summary.csv")
    p.add_argument("--json-output", default=None)

    p = sub.add_parser("expand-window", help="expanding-window estimates")
    p.add_argument("--input", "-i", required=True)
    _add_schema_flags(p)
    p.add_argument("--start-end", type=int, default=1980,
                   help="end year of the first window")
    p.add_argument("--methods", default="ols,3m,dc2")
    p.add_argument("--fe", action="store_true", default=True)
    p.add_argument("--no-fe", dest="fe", action="store_false")
    p.add_argument("--alpha", type=float, default=0.05)
    p.add_argument("--bootstrap-draws", type=int, default=399)
    p.add_argument("--partition-mode", choices=["random", "adjacent"], default="random")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--output", "-o", default="windows.csv")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def _apply_config_file(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    try:
        path = argv[idx + 1]
    except IndexError:
        parser.error("--config needs a file argument")
    text = Path(path).read_text()
    defaults = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            parser.error(f"{path}:{lineno}: expected key=value")
        key, _, value = line.partition("=")
        key = key.strip().replace("-", "_")
        value = value.strip()
        try:
            defaults[key] = json.loads(value)
        except ValueError:
            defaults[key] = value
    parser.set_defaults(**defaults)
    return argv


def cmd_simulate(args, client: ServiceClient) -> int:
    seed = _resolve_seed(args)
    schema = _schema_payload(args)
    payload = {
        "dgp": _dgp_payload(args), "seed": seed, "first_year": args.first_year,
        "panel_schema": {**schema, "z": schema["z"] or ["z1"]},
    }
    result = client.post("/simulate", payload)
    Path(args.output).write_text(result["csv_content"])
    print(f"wrote {result['n_obs']} rows to {args.output} (seed {result['seed']})")
    return 0


def cmd_estimate(args, client: ServiceClient) -> int:
    seed = _resolve_seed(args)
    payload = {
        "csv_content": _read_input(args.input),
        "panel_schema": _schema_payload(args),
        "method": args.method, "blocks_per_year": args.blocks_per_year,
        "fe": args.fe, "te": args.te, "alpha": args.alpha,
        "bootstrap_draws": args.bootstrap_draws,
        "partition_mode": args.partition_mode, "seed": seed,
    }
    result = client.post("/estimate", payload)
    lo, hi = result["ci_beta"]
    print(f"method: {result['method']}   n_obs: {result['n_obs']}   "
          f"dropped single-year firms: {result['n_single_year_dropped']}")
    print(f"beta: {result['beta_hat']:.6g}   "
          f"{100 * (1 - args.alpha):.0f}% CI: ({lo:.6g}, {hi:.6g})")
    for name, g, ci in zip(result["gamma_names"], result["gamma_hat"], result["ci_gamma"]):
        print(f"{name}: {g:.6g}   CI: ({ci[0]:.6g}, {ci[1]:.6g})")
    if result["n_degenerate_blocks"]:
        print(f"degenerate blocks excluded: {result['n_degenerate_blocks']}")
    text = json.dumps(result, indent=2)
    if args.output:
        Path(args.output).write_text(text)
        print(f"report written to {args.output}")
    else:
        print(text)
    return 0


def _print_paper_scale_reference(beta: float) -> None:
    from .experiments import PAPER_SCALE_REFERENCE

    key = 0.025 if abs(beta - 0.025) < 1e-12 else 0.0 if beta == 0 else None
    print("warning: full-scale design takes hours; reference cells "
          "(mean, sd) for comparison:")
    if key is None:
        print(f"  no reference cells for beta={beta}")
        return
    for (method, spec), (beta_cell, gamma_cell) in PAPER_SCALE_REFERENCE[key].items():
        print(f"  beta0={key} {method:<7} spec({spec}): "
              f"beta {beta_cell[0]:.3f} ({beta_cell[1]:.3f})   "
              f"gamma {gamma_cell[0]:.3f} ({gamma_cell[1]:.3f})")


def cmd_mc(args, client: ServiceClient) -> int:
    seed = _resolve_seed(args)
    dgp = _dgp_payload(args)
    if args.paper_scale:
        dgp.setdefault("n", 3000)
        dgp.setdefault("T", 20)
        args.reps = 20000
        _print_paper_scale_reference(dgp.get("beta", 0.025))
    payload = {
        "dgp": dgp, "reps": args.reps,
        "methods": [m for m in args.methods.split(",") if m],
        "specs": [int(s) for s in args.specs.split(",") if s],
        "alpha": args.alpha, "bootstrap_draws": args.bootstrap_draws,
        "partition_mode": args.partition_mode, "seed": seed,
        "threads": args.threads,
    }
    result = client.post("/mc", payload)
    print(result["table_text"], end="")
    Path(args.output).write_text(result["csv_content"])
    print(f"summary written to {args.output} (seed {result['seed']})")
    if args.json_output:
        Path(args.json_output).write_text(json.dumps(
            {"cells": result["cells"], "config": result["config"]}, indent=2))
        print(f"JSON summary written to {args.json_output}")
    return 0


def cmd_expand_window(args, client: ServiceClient) -> int:
    seed = _resolve_seed(args)
    payload = {
        "csv_content": _read_input(args.input),
        "panel_schema": _schema_payload(args),
        "start_end": args.start_end,
        "methods": [m for m in args.methods.split(",") if m],
        "fe": args.fe, "alpha": args.alpha,
        "bootstrap_draws": args.bootstrap_draws,
        "partition_mode": args.partition_mode, "seed": seed,
    }
    result = client.post("/expand-window", payload)
    Path(args.output).write_text(result["csv_content"])
    print(f"{len(result['rows'])} rows written to {args.output} "
          f"(seed {result['seed']})")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    uvicorn.run("eivdc.service.app:app", host=args.host, port=args.port)
    return 0


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    argv = _apply_config_file(parser, argv)
    args = parser.parse_args(argv)
    try:
        if args.command == "serve":
            return cmd_serve(args)
        client = ServiceClient(args.server)
        if args.command == "simulate":
            return cmd_simulate(args, client)
        if args.command == "estimate":
            return cmd_estimate(args, client)
        if args.command == "mc":
            return cmd_mc(args, client)
        if args.command == "expand-window":
            return cmd_expand_window(args, client)
        parser.error(f"unknown command {args.command!r}")
    except CommandError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())

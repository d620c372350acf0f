"""Command-line surface: load a matrix, run a subcommand, emit a report.

Subcommands:
    estimate     Monte Carlo eigenpair with diagnostics.
    oracle       power-iteration eigenpair plus the equilibrium residual.
    compare      both, with the L1 eigenvector gap and relative eigenvalue gap.
    lemma-check  partial sums of the return-weight series at the oracle value.
    gw-sim       branching-tree type proportions against the oracle vector.

States are 1-based on this surface (and in reports); the library is
0-based and the conversion happens only here.  Reports carry the full
resolved configuration, contain no timestamps, and are byte-identical for
identical invocations.

Exit codes: 0 success; 1 bad input (parse/validation/precondition);
2 not primitive; 3 a statistical or numerical guard refused to report.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import estimator, gw_app, oracle
from .errors import (
    AllTruncated,
    BracketFailure,
    Divergence,
    EmptyBatch,
    NoConvergence,
    NoSurvivors,
    NotPrimitive,
    ParseError,
    PerronMCError,
    PopulationOverflow,
    TruncationBiasGuard,
)
from .matrix_core import NonNegativeMatrix, validate

__all__ = ["RunConfig", "parse_matrix", "run", "main"]

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NOT_PRIMITIVE = 2
EXIT_GUARD = 3

_GUARD_ERRORS = (
    AllTruncated,
    BracketFailure,
    Divergence,
    EmptyBatch,
    NoConvergence,
    NoSurvivors,
    PopulationOverflow,
    TruncationBiasGuard,
)


@dataclass(frozen=True)
class RunConfig:
    """Resolved invocation; every field is echoed into the report."""

    subcommand: str
    matrix_path: str
    base_state: int = 1
    samples: int = 100_000
    seed: int = 0
    cap: int = 1_000_000
    shards: int = 1
    tol: float = 1e-10
    trials: int = 10_000
    horizon: int = 10
    offspring_law: str = "poisson"
    output: str = "json"


def parse_matrix(path: str | Path) -> NonNegativeMatrix:
    """Load and validate a matrix from a .json or .csv file.

    Raises:
        ParseError: missing file, unknown extension, malformed content
            (with the offending line/field where applicable).
        NegativeEntry/ZeroRow/NotSquare...: validation failures, unchanged.
    """
    path = Path(path)
    if not path.exists():
        raise ParseError(str(path), "file does not exist")
    if path.suffix == ".json":
        rows = _rows_from_json(path)
    elif path.suffix == ".csv":
        rows = _rows_from_csv(path)
    else:
        raise ParseError(str(path), f"unsupported extension {path.suffix!r}")
    return validate(rows)


def _rows_from_json(path: Path) -> list[list[float]]:
    try:
        payload = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(str(path), f"invalid JSON: {exc}")
    if not isinstance(payload, dict) or "n" not in payload or "rows" not in payload:
        raise ParseError(str(path), 'expected an object {"n": ..., "rows": ...}')
    n, rows = payload["n"], payload["rows"]
    if not isinstance(n, int) or not isinstance(rows, list) or len(rows) != n:
        raise ParseError(str(path), f'"rows" must hold exactly n={n} rows')
    for i, row in enumerate(rows):
        if not isinstance(row, list) or len(row) != n:
            raise ParseError(str(path), f"row {i + 1} does not have {n} fields")
        for j, value in enumerate(row):
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                raise ParseError(str(path),
                                 f"row {i + 1}, field {j + 1}: not a number")
    return rows


def _rows_from_csv(path: Path) -> list[list[float]]:
    rows: list[list[float]] = []
    lines = [ln for ln in path.read_text().splitlines() if ln.strip()]
    if not lines:
        raise ParseError(str(path), "file is empty")
    for i, line in enumerate(lines):
        fields = line.split(",")
        row = []
        for j, field in enumerate(fields):
            try:
                row.append(float(field))
            except ValueError:
                raise ParseError(
                    str(path),
                    f"line {i + 1}, field {j + 1}: {field.strip()!r} is not a number",
                )
        rows.append(row)
    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise ParseError(str(path),
                             f"line {i + 1} has {len(row)} fields, expected {width}")
    return rows


def _config_dict(cfg: RunConfig) -> dict:
    base = {
        "subcommand": cfg.subcommand,
        "matrix_path": cfg.matrix_path,
        "base_state": cfg.base_state,
        "seed": cfg.seed,
        "output": cfg.output,
    }
    if cfg.subcommand in ("estimate", "compare"):
        base.update(samples=cfg.samples, cap=cfg.cap, shards=cfg.shards,
                    tol=cfg.tol)
    if cfg.subcommand == "gw-sim":
        base.update(trials=cfg.trials, horizon=cfg.horizon,
                    offspring_law=cfg.offspring_law)
    return base


def _estimate_payload(report: estimator.EstimateReport, cfg: RunConfig) -> dict:
    return {
        "lambda_hat": report.lambda_hat,
        "u_hat": report.u_hat.tolist(),
        "base_state": cfg.base_state,
        "samples": report.sample_count,
        "truncated": report.truncated_count,
        "g_residual": report.g_residual,
        "dispersion": None if report.dispersion is None else report.dispersion.tolist(),
    }


def _oracle_payload(matrix: NonNegativeMatrix) -> dict:
    pair = oracle.power_iteration(matrix)
    residual = oracle.quasispecies_residual(matrix, pair.vector)
    return {
        "lambda": pair.eigenvalue,
        "u": pair.vector.tolist(),
        "power_residual": pair.residual,
        "qs_max_abs": residual.max_abs,
        "mean_fitness": residual.mean_fitness,
    }


def run(config: RunConfig) -> dict:
    """Execute one subcommand and return the report as a plain dict."""
    matrix = parse_matrix(config.matrix_path)
    if not 1 <= config.base_state <= matrix.n:
        raise ParseError(config.matrix_path,
                         f"base state {config.base_state} outside 1..{matrix.n}")
    k = config.base_state - 1

    if config.subcommand == "estimate":
        report = estimator.run_estimation(matrix, _estimation_config(config, k))
        payload = _estimate_payload(report, config)
    elif config.subcommand == "oracle":
        payload = _oracle_payload(matrix)
    elif config.subcommand == "compare":
        report = estimator.run_estimation(matrix, _estimation_config(config, k))
        payload = _estimate_payload(report, config)
        payload.update(_oracle_payload(matrix))
        u_hat = np.asarray(payload["u_hat"])
        u = np.asarray(payload["u"])
        payload["l1_error"] = float(np.abs(u_hat - u).sum())
        payload["lambda_rel_error"] = float(
            abs(payload["lambda_hat"] - payload["lambda"]) / payload["lambda"]
        )
    elif config.subcommand == "lemma-check":
        pair = oracle.power_iteration(matrix)
        series = oracle.lemma_partial_sums(matrix, k, pair.eigenvalue)
        payload = {
            "lambda": pair.eigenvalue,
            "base_state": config.base_state,
            "final_partial_sum": float(series.partial_sums[-1]),
            "terms_used": int(series.terms.shape[0]),
            "tail_ratio": series.tail_ratio,
        }
    elif config.subcommand == "gw-sim":
        pair = oracle.power_iteration(matrix)
        proportions, survivors = gw_app.conditioned_proportions(
            matrix, config.trials, config.horizon, config.seed,
            law=config.offspring_law,
        )
        payload = {
            "proportions": proportions.tolist(),
            "survivors": survivors,
            "lambda": pair.eigenvalue,
            "u": pair.vector.tolist(),
            "l1_to_oracle": float(np.abs(proportions - pair.vector).sum()),
        }
    else:
        raise ValueError(f"unknown subcommand {config.subcommand!r}")

    payload["config"] = _config_dict(config)
    return payload


def _estimation_config(cfg: RunConfig, k: int) -> estimator.EstimationConfig:
    return estimator.EstimationConfig(
        base_state=k, samples=cfg.samples, seed=cfg.seed, cap=cfg.cap,
        shards=cfg.shards, tol=cfg.tol,
    )


def _render_text(payload: dict, lines: list[str] | None = None,
                 prefix: str = "") -> list[str]:
    if lines is None:
        lines = []
    for key in sorted(payload):
        value = payload[key]
        if isinstance(value, dict):
            _render_text(value, lines, prefix=f"{prefix}{key}.")
        elif isinstance(value, list):
            lines.append(f"{prefix}{key}: " + " ".join(str(v) for v in value))
        else:
            lines.append(f"{prefix}{key}: {value}")
    return lines


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="perronmc",
        description="Dominant eigenpair of a non-negative matrix by "
                    "excursion-weighted Monte Carlo, with deterministic checks.",
    )
    sub = parser.add_subparsers(dest="subcommand", required=True)

    def common(p, sampling: bool):
        p.add_argument("matrix", help="path to a .json or .csv matrix file")
        p.add_argument("--base-state", type=int, default=1,
                       help="1-based excursion base state (default 1)")
        p.add_argument("--seed", type=int, default=0, help="64-bit RNG seed")
        p.add_argument("--output", choices=("json", "text"), default="json")
        if sampling:
            p.add_argument("--samples", type=int, default=100_000)
            p.add_argument("--cap", type=int, default=1_000_000,
                           help="excursion length cap")
            p.add_argument("--shards", type=int, default=1,
                           help="independent RNG streams")
            p.add_argument("--tol", type=float, default=1e-10,
                           help="tolerance on the mean return weight")

    common(sub.add_parser("estimate", help="Monte Carlo eigenpair"), True)
    common(sub.add_parser("oracle", help="deterministic eigenpair"), False)
    common(sub.add_parser("compare", help="estimate vs oracle"), True)
    common(sub.add_parser("lemma-check",
                          help="return-weight series at the oracle value"), False)
    gw = sub.add_parser("gw-sim", help="branching-tree type proportions")
    common(gw, False)
    gw.add_argument("--trials", type=int, default=10_000)
    gw.add_argument("--horizon", type=int, default=10)
    gw.add_argument("--offspring-law", choices=gw_app.OFFSPRING_LAWS,
                    default="poisson")
    return parser


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    fields = {
        "subcommand": args.subcommand,
        "matrix_path": args.matrix,
        "base_state": args.base_state,
        "seed": args.seed % (1 << 64),
        "output": args.output,
    }
    for name in ("samples", "cap", "shards", "tol", "trials", "horizon"):
        if hasattr(args, name):
            fields[name] = getattr(args, name)
    if hasattr(args, "offspring_law"):
        fields["offspring_law"] = args.offspring_law
    return RunConfig(**fields)


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    config = _config_from_args(args)
    try:
        payload = run(config)
    except NotPrimitive as exc:
        print(f"error: NotPrimitive: {exc}", file=sys.stderr)
        return EXIT_NOT_PRIMITIVE
    except _GUARD_ERRORS as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_GUARD
    except (PerronMCError, ValueError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INPUT

    if config.output == "json":
        print(json.dumps(payload, sort_keys=True, indent=2))
    else:
        print("\n".join(_render_text(payload)))
    return EXIT_OK


if __name__ == "__main__":
    raise SystemExit(main())

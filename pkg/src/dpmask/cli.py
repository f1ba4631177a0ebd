"""Command-line front end.

Subcommands: ingest (scale a CSV into [-1, 1]), calibrate (all sigma bounds
as JSON), release (pseudo-data CSV plus JSON sidecar), table1 (the bound
comparison grid, optionally diffed against a reference), audit (numerical
verification checks).

Exit codes: 0 success, 1 I/O or parse failure, 2 precondition/regime
violation, 3 audit violation or reference mismatch.
"""

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np

from . import audit as audit_mod
from . import calibration as cal
from .ingest import ParseError, ingest_csv, read_numeric_csv
from .mechanisms import DataMatrix, make_neighbor, release_components

EXIT_OK = 0
EXIT_IO = 1
EXIT_PRECONDITION = 2
EXIT_AUDIT = 3

SEED_ENV_VAR = "DPMASK_SEED"

AUDIT_CHECKS = (
    "violation-A",
    "violation-BC",
    "g-ratio",
    "sphere",
    "ratio-bound",
    "quantile-brackets",
    "birge",
)


def _default_seed() -> int:
    return int(os.environ.get(SEED_ENV_VAR, "0"))


def _write_text(text: str, output) -> None:
    if output:
        Path(output).write_text(text)
    else:
        sys.stdout.write(text)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dpmask",
        description="Calibrate, release and audit Gaussian pseudo-data mechanisms "
        "with random orthogonal masking.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_ingest = sub.add_parser("ingest", help="scale a numeric CSV into [-1, 1] per column")
    p_ingest.add_argument("input")
    p_ingest.add_argument("--output", required=True, help="scaled CSV path")
    p_ingest.add_argument("--scaling", help="scaling record JSON path (default: <output>.scaling.json)")

    p_cal = sub.add_parser("calibrate", help="compute every sigma bound for (epsilon, delta, n, p)")
    p_cal.add_argument("--epsilon", type=float, required=True)
    p_cal.add_argument("--delta", type=float, required=True)
    p_cal.add_argument("--n", type=int, required=True)
    p_cal.add_argument("--p", type=int, required=True)
    p_cal.add_argument("--output", help="write JSON here instead of stdout")

    p_rel = sub.add_parser("release", help="release a pseudo-data matrix from an ingested CSV")
    p_rel.add_argument("--input", required=True, help="ingested CSV (entries in [-1, 1])")
    p_rel.add_argument("--setting", choices=("A", "B", "C"), required=True)
    sigma_group = p_rel.add_mutually_exclusive_group(required=True)
    sigma_group.add_argument("--sigma", type=float)
    sigma_group.add_argument("--auto-sigma", action="store_true",
                             help="calibrate sigma from --epsilon/--delta for the setting")
    p_rel.add_argument("--epsilon", type=float)
    p_rel.add_argument("--delta", type=float)
    p_rel.add_argument("--seed", type=int, default=None,
                       help=f"RNG seed (default: ${SEED_ENV_VAR} or 0)")
    p_rel.add_argument("--output", required=True, help="pseudo-data CSV path")
    p_rel.add_argument("--sidecar", help="metadata JSON path (default: <output>.json)")
    p_rel.add_argument("--report-gram", action="store_true",
                       help="print the masked-vs-noised Gram residual (setting B)")

    p_tab = sub.add_parser("table1", help="emit the sigma bound comparison grid as CSV")
    p_tab.add_argument("--output", help="write CSV here instead of stdout")
    p_tab.add_argument("--diff", help="reference CSV to compare against")
    p_tab.add_argument("--tol-sigma", type=float, default=0.05)
    p_tab.add_argument("--tol-ratio", type=float, default=0.005)
    p_tab.add_argument("--grid", nargs="*", default=[],
                       help="restrict the grid, e.g. epsilon=0.1 delta=0.01,0.001 p=5 n=100")

    p_aud = sub.add_parser("audit", help="run one numerical verification check")
    p_aud.add_argument("--check", choices=AUDIT_CHECKS, required=True)
    p_aud.add_argument("--epsilon", type=float, default=0.5)
    p_aud.add_argument("--delta", type=float, default=0.05)
    p_aud.add_argument("--sigma", type=float, help="noise scale (default: calibrated)")
    p_aud.add_argument("--n", type=int, default=4)
    p_aud.add_argument("--p", type=int, default=1)
    p_aud.add_argument("--q", type=int, default=3, help="subspace dimension / G index")
    p_aud.add_argument("--t1", type=float, default=1.0)
    p_aud.add_argument("--t2", type=float, default=3.0)
    p_aud.add_argument("--samples", type=int, default=None)
    p_aud.add_argument("--inner-samples", type=int, default=audit_mod.DEFAULT_INNER_SAMPLES)
    p_aud.add_argument("--seed", type=int, default=None)
    p_aud.add_argument("--output", help="write the report JSON here instead of stdout")
    return parser


# --------------------------------------------------------------------------
# subcommand bodies
# --------------------------------------------------------------------------

def _cmd_ingest(args) -> int:
    matrix, record, _header = ingest_csv(args.input)
    lines = [",".join(repr(float(v)) for v in row) for row in matrix.values]
    _write_text("\n".join(lines) + "\n", args.output)
    scaling_path = args.scaling or f"{args.output}.scaling.json"
    record.save(scaling_path)
    return EXIT_OK


def _cmd_calibrate(args) -> int:
    budget = cal.PrivacyBudget(args.epsilon, args.delta)
    shape = cal.ProblemShape(args.n, args.p)
    report = cal.calibrate(budget, shape)
    _write_text(report.to_json() + "\n", args.output)
    if report.regime_errors:
        for name, message in report.regime_errors.items():
            print(f"regime error [{name}]: {message}", file=sys.stderr)
        return EXIT_PRECONDITION
    return EXIT_OK


def _auto_sigma(setting: str, epsilon, delta, n, p) -> float:
    if epsilon is None or delta is None:
        raise ValueError("--auto-sigma requires --epsilon and --delta")
    budget = cal.PrivacyBudget(epsilon, delta)
    if setting == "A":
        return cal.sigma_sufficient_A(budget)
    return cal.sigma_joint_BC(budget, cal.ProblemShape(n, p))[0]


def _cmd_release(args) -> int:
    raw, _header = read_numeric_csv(args.input)
    try:
        data = DataMatrix(raw)
    except ValueError as exc:
        raise ValueError(f"{exc}; run `dpmask ingest` first") from None
    sigma = args.sigma
    if args.auto_sigma:
        sigma = _auto_sigma(args.setting, args.epsilon, args.delta, data.n, data.p)
    seed = _default_seed() if args.seed is None else args.seed
    mask, noise, artifact = release_components(data, args.setting, sigma, seed)
    artifact.save(args.output, args.sidecar)
    if args.report_gram:
        if args.setting != "B":
            raise ValueError("--report-gram applies to setting B only")
        y = artifact.pseudo_data
        noised = data.values + noise
        residual = float(np.max(np.abs(y.T @ y - noised.T @ noised)))
        print(json.dumps({"gram_residual_max": residual, "allowance": 1e-9 * data.n}))
    return EXIT_OK


def _parse_grid(tokens):
    allowed = {"epsilon": "epsilons", "delta": "deltas", "p": "ps", "n": "ns"}
    kwargs = {}
    for token in tokens:
        if "=" not in token:
            raise ValueError(f"--grid expects key=value tokens, got {token!r}")
        key, _, raw = token.partition("=")
        if key not in allowed:
            raise ValueError(f"unknown grid key {key!r} (use epsilon, delta, p, n)")
        values = [float(v) if key in ("epsilon", "delta") else int(v) for v in raw.split(",")]
        kwargs[allowed[key]] = tuple(values)
    return kwargs


def _diff_table(rows, reference_path, tol_sigma: float, tol_ratio: float) -> list[str]:
    ref_raw, header = read_numeric_csv(reference_path)
    if header is None or [h.strip() for h in header] != cal.TABLE1_HEADER.split(","):
        raise ValueError(f"{reference_path}: expected header {cal.TABLE1_HEADER!r}")
    by_key = {}
    for row in ref_raw:
        by_key[(row[0], row[1], int(row[2]), int(row[3]))] = row[4:]
    problems = []
    for r in rows:
        key = (r.epsilon, r.delta, r.p, r.n)
        if key not in by_key:
            problems.append(f"reference is missing row {key}")
            continue
        ref_nec, ref_suf, ref_bc, ref_ratio = by_key[key]
        for label, mine, ref, tol in (
            ("sigma_nec_A", r.sigma_necessary_A, ref_nec, tol_sigma),
            ("sigma_suf_A", r.sigma_sufficient_A, ref_suf, tol_sigma),
            ("sigma_BC", r.sigma_joint_BC, ref_bc, tol_sigma),
            ("ratio", r.ratio_BC_over_A, ref_ratio, tol_ratio),
        ):
            if mine is None or abs(mine - ref) > tol + 1e-12:
                problems.append(
                    f"row {key} column {label}: computed {mine} vs reference {ref} (tol {tol})"
                )
    return problems


def _cmd_table1(args) -> int:
    rows = cal.table1(**_parse_grid(args.grid))
    _write_text(cal.table1_csv(rows), args.output)
    if args.diff:
        problems = _diff_table(rows, args.diff, args.tol_sigma, args.tol_ratio)
        if problems:
            for line in problems:
                print(line, file=sys.stderr)
            return EXIT_AUDIT
    return EXIT_OK


def _worst_case_pair(n: int, p: int):
    """Neighbors with maximal one-row difference: a zero row raised to norm 1
    inside an otherwise all-ones matrix."""
    base = np.ones((n, p))
    base[0] = 0.0
    delta = np.zeros(p)
    delta[0] = 1.0
    return make_neighbor(DataMatrix(base), 0, delta)


def _cmd_audit(args) -> int:
    seed = _default_seed() if args.seed is None else args.seed
    check = args.check
    if check == "quantile-brackets":
        report = audit_mod.quantile_bracket_suite()
    elif check == "birge":
        report = audit_mod.birge_suite()
    elif check == "g-ratio":
        report = audit_mod.g_ratio_bound_check(args.q, args.t1, args.t2)
    elif check == "sphere":
        rng = np.random.Generator(np.random.PCG64(seed))
        v = 2.0 * rng.standard_normal(args.n)
        report = audit_mod.sphere_integral_check(args.n, args.q, v, subspace_seed=seed)
    elif check == "violation-A":
        budget = cal.PrivacyBudget(args.epsilon, args.delta)
        sigma = args.sigma if args.sigma else cal.sigma_sufficient_A(budget)
        pair = _worst_case_pair(args.n, args.p)
        report = audit_mod.violation_probability_MC(
            pair, "A", sigma, args.epsilon,
            samples=args.samples or 1_000_000, seed=seed, delta=args.delta,
        )
    elif check == "violation-BC":
        budget = cal.PrivacyBudget(args.epsilon, args.delta)
        shape = cal.ProblemShape(args.n, args.p)
        sigma = args.sigma if args.sigma else cal.sigma_joint_BC(budget, shape)[0]
        pair = _worst_case_pair(args.n, args.p)
        report = audit_mod.violation_probability_MC(
            pair, "B", sigma, args.epsilon,
            samples=args.samples or 200, seed=seed,
            inner_samples=args.inner_samples, delta=args.delta,
        )
    elif check == "ratio-bound":
        pair = _worst_case_pair(args.n, args.p)
        report = audit_mod.density_ratio_bound_check_BC(
            pair, args.sigma or 4.0, samples=args.samples or 200, seed=seed,
            inner_samples=args.inner_samples,
        )
    else:  # pragma: no cover - argparse limits the choices
        raise ValueError(f"unknown check {check!r}")
    _write_text(report.to_json() + "\n", args.output)
    return EXIT_OK if report.verdict == audit_mod.VERDICT_CONSISTENT else EXIT_AUDIT


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "ingest": _cmd_ingest,
        "calibrate": _cmd_calibrate,
        "release": _cmd_release,
        "table1": _cmd_table1,
        "audit": _cmd_audit,
    }
    try:
        return handlers[args.command](args)
    except (ParseError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except audit_mod.AuditScaleError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


if __name__ == "__main__":
    raise SystemExit(main())

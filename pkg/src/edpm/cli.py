"""Command-line interface.

Subcommands: simulate, fit-blocked, fit-polya, bounds, min-trunc, predict,
diagnose, study. Options may come from a flat JSON config file (--config);
explicit command-line flags override config values. Every run writes a
manifest JSON listing the resolved parameters and produced artifacts.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O
error. The default output directory is $EDPM_OUTPUT_DIR (else the current
directory).
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
from datetime import datetime, timezone
from importlib import metadata
from pathlib import Path

import numpy as np

from .blocked import ChainConfig, iter_chain, resolve_truncation
from .bounds import BoundQuery, l1_bound, min_truncation
from .chains import ChainWriter, iter_chain_file
from .core import Dataset, Truncation, default_hyperparameters
from .errors import ConfigError, EdpmError, MatrixError, NumericalError
from .predict import predictive_values
from .simstudy import (DgpConfig, StudyConfig, batch_stats_from_values,
                       generate_dataset, run_study)
from .urn import iter_pu_chain

_STATS = ("mean", "q025", "q25", "q75", "q975")


def _version() -> str:
    try:
        return metadata.version("edpm")
    except metadata.PackageNotFoundError:
        return "unknown"


def _out_dir(args) -> Path:
    out = args.out or os.environ.get("EDPM_OUTPUT_DIR") or "."
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    return path


def write_manifest(out_dir: Path, subcommand: str, args: argparse.Namespace,
                   artifacts: list) -> Path:
    params = {k: v for k, v in vars(args).items()
              if k not in ("func", "config") and v is not None}
    manifest = {
        "subcommand": subcommand,
        "config": getattr(args, "config", None),
        "params": params,
        "seed": getattr(args, "seed", None),
        "artifacts": [str(a) for a in artifacts],
        "version": _version(),
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    path = out_dir / f"manifest-{subcommand}.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n")
    return path


def parse_config(path, parser: argparse.ArgumentParser) -> dict:
    """Load a flat JSON config; keys must name options of the subcommand."""
    try:
        raw = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from None
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as e:
        raise ConfigError(f"config {path} is not valid JSON: {e}") from None
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    known = {a.dest for a in parser._actions}
    out = {}
    for key, value in cfg.items():
        dest = key.replace("-", "_").replace(".", "_")
        if dest not in known:
            raise ConfigError(f"unknown config key: {key!r}")
        out[dest] = value
    return out


def _apply_config(args: argparse.Namespace, parser, argv) -> argparse.Namespace:
    """Fill unset options from the config file; explicit flags win."""
    if not getattr(args, "config", None):
        return args
    cfg = parse_config(args.config, parser)
    on_cli = set()
    for action in parser._actions:
        for opt in action.option_strings:
            if any(tok == opt or tok.startswith(opt + "=") for tok in argv):
                on_cli.add(action.dest)
    for dest, value in cfg.items():
        if dest not in on_cli:
            setattr(args, dest, value)
    return args


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    out_dir = _out_dir(args)
    dgp = DgpConfig(p=args.p, n=args.n)
    rng = np.random.default_rng(np.random.SeedSequence(args.seed))
    data = generate_dataset(dgp, rng)
    path = out_dir / args.name
    data.to_csv(path)
    write_manifest(out_dir, "simulate", args, [path])
    print(f"wrote {path}")
    return 0


def _fit_common(args, kind: str) -> int:
    out_dir = _out_dir(args)
    data = Dataset.from_csv(args.data)
    hp = default_hyperparameters(data, alpha_psi_shared=args.alpha_psi_shared)
    cfg = ChainConfig(iterations=args.iterations, burn_in=args.burn_in,
                      thin=args.thin, seed=args.seed,
                      auto_epsilon=getattr(args, "eps", 0.01))
    if kind == "blocked":
        if args.N is not None and args.M is not None:
            trunc = Truncation(args.N, args.M)
        else:
            trunc = resolve_truncation(data, hp, cfg)
            print(f"auto truncation: N={trunc.N} M={trunc.M}")
        cfg = ChainConfig(iterations=args.iterations, burn_in=args.burn_in,
                          thin=args.thin, seed=args.seed, trunc=trunc)
        draws = iter_chain(data, hp, cfg)
    else:
        draws = iter_pu_chain(data, hp, cfg, m_aux=args.m_aux)
    chain_path = out_dir / args.chain_name
    summary_path = chain_path.with_suffix(".csv")
    with ChainWriter(chain_path, summary_path) as w:
        n_draws = 0
        for d in draws:
            w.write(d)
            n_draws += 1
    write_manifest(out_dir, f"fit-{kind if kind == 'blocked' else 'polya'}",
                   args, [chain_path, summary_path])
    print(f"wrote {n_draws} draws to {chain_path}")
    return 0


def cmd_fit_blocked(args) -> int:
    return _fit_common(args, "blocked")


def cmd_fit_polya(args) -> int:
    return _fit_common(args, "polya")


def cmd_bounds(args) -> int:
    q = BoundQuery(n=args.n, N=args.N, M=args.M,
                   alpha_theta=args.alpha_theta, alpha_psi=args.alpha_psi)
    res = l1_bound(q)
    print(f"{res.bound:.4g}")
    write_manifest(_out_dir(args), "bounds", args, [])
    return 0


def cmd_min_trunc(args) -> int:
    N, M = min_truncation(args.n, args.alpha_theta, args.alpha_psi, args.eps)
    print(f"N={N} M={M}")
    write_manifest(_out_dir(args), "min-trunc", args, [])
    return 0


def cmd_predict(args) -> int:
    out_dir = _out_dir(args)
    X = _read_points(args.x)
    draws = iter_chain_file(args.chain)
    values = predictive_values(draws, X)
    q = np.quantile(values, [0.025, 0.25, 0.75, 0.975], axis=0)
    path = out_dir / args.name
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["id", "mean", "q025", "q25", "q75", "q975"])
        for i in range(X.shape[0]):
            w.writerow([i, repr(float(values[:, i].mean())),
                        *(repr(float(q[lv, i])) for lv in range(4))])
    write_manifest(out_dir, "predict", args, [path])
    print(f"wrote {path}")
    return 0


def _read_points(path) -> np.ndarray:
    """Covariate points CSV with header x1..xp."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ConfigError(f"{path}: empty points file")
    header = [h.strip() for h in rows[0]]
    expected = [f"x{i}" for i in range(1, len(header) + 1)]
    if header != expected:
        raise ConfigError(f"{path}: header must be {','.join(expected)}")
    try:
        X = np.array([[float(v) for v in r] for r in rows[1:] if r])
    except ValueError as e:
        raise ConfigError(f"{path}: non-numeric value: {e}") from None
    if X.ndim != 2 or X.shape[1] != len(header) or X.shape[0] == 0:
        raise ConfigError(f"{path}: malformed points table")
    return X


def cmd_diagnose(args) -> int:
    out_dir = _out_dir(args)
    data = Dataset.from_csv(args.data)
    draws = iter_chain_file(args.chain)
    values = predictive_values(draws, data.X)
    stats = batch_stats_from_values(values, batch_size=args.batch_size)
    path = out_dir / args.name
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["statistic", "batch_mean", "batch_sd"])
        for name in _STATS:
            w.writerow([name, repr(stats[name][0]), repr(stats[name][1])])
    write_manifest(out_dir, "diagnose", args, [path])
    print(f"wrote {path}")
    return 0


def cmd_study(args) -> int:
    out_dir = _out_dir(args)
    scfg = StudyConfig(
        p_values=tuple(args.p_values), n_datasets=args.datasets, n=args.n,
        m_test=args.m_test, samplers=tuple(args.samplers),
        iterations=args.iterations, burn_in=args.burn_in,
        batch_size=args.batch_size, seed=args.seed, epsilon=args.eps,
        include_mixing=args.mixing)
    report = run_study(scfg)
    report_path = out_dir / "study-report.json"
    report_path.write_text(json.dumps(report, indent=2) + "\n")
    artifacts = [report_path]
    acc_path = out_dir / "study-accuracy.csv"
    with open(acc_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["p", "sampler", "l1_mean", "l1_sd", "l2_mean", "l2_sd"])
        for p, by_sampler in report["accuracy"].items():
            for sampler, vals in by_sampler.items():
                w.writerow([p, sampler, *(repr(vals[k]) for k in
                                          ("l1_mean", "l1_sd",
                                           "l2_mean", "l2_sd"))])
    artifacts.append(acc_path)
    if report["mixing"]:
        mix_path = out_dir / "study-mixing.csv"
        with open(mix_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["p", "sampler", "statistic", "batch_mean", "batch_sd"])
            for p, by_sampler in report["mixing"].items():
                for sampler, stats in by_sampler.items():
                    for name in _STATS:
                        w.writerow([p, sampler, name,
                                    repr(stats[name]["mean"]),
                                    repr(stats[name]["sd"])])
        artifacts.append(mix_path)
    write_manifest(out_dir, "study", args, artifacts)
    print(f"wrote {report_path}")
    return 0


# ---------------------------------------------------------------------------
# parser construction
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edpm",
        description="Enriched mixture-of-normals regression toolkit")
    sub = parser.add_subparsers(dest="subcommand")

    parser.subparser_map = {}

    def add(name, func, **kw):
        p = sub.add_parser(name, **kw)
        parser.subparser_map[name] = p
        p.set_defaults(func=func)
        p.add_argument("--config", help="flat JSON config file")
        p.add_argument("--out", help="output directory "
                       "(default $EDPM_OUTPUT_DIR or .)")
        p.add_argument("--seed", type=int, default=0)
        return p

    p = add("simulate", cmd_simulate, help="generate a benchmark dataset")
    p.add_argument("--p", type=int, default=5)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--name", default="dataset.csv")

    for name, func in (("fit-blocked", cmd_fit_blocked),
                       ("fit-polya", cmd_fit_polya)):
        p = add(name, func, help=f"run the {name.split('-')[1]} sampler")
        p.add_argument("--data", required=True)
        p.add_argument("--iterations", type=int, default=20_000)
        p.add_argument("--burn-in", type=int, default=5_000)
        p.add_argument("--thin", type=int, default=1)
        p.add_argument("--alpha-psi-shared", action="store_true")
        p.add_argument("--chain-name", default="chain.jsonl")
        if name == "fit-blocked":
            p.add_argument("--N", type=int)
            p.add_argument("--M", type=int)
            p.add_argument("--eps", type=float, default=0.01,
                           help="auto-truncation budget when N/M unset")
        else:
            p.add_argument("--m-aux", type=int, default=3)

    p = add("bounds", cmd_bounds, help="closed-form truncation error bound")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--M", type=int, required=True)
    p.add_argument("--alpha-theta", type=float, required=True)
    p.add_argument("--alpha-psi", type=float, required=True)

    p = add("min-trunc", cmd_min_trunc, help="smallest truncation meeting a "
            "bound budget")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha-theta", type=float, required=True)
    p.add_argument("--alpha-psi", type=float, required=True)
    p.add_argument("--eps", type=float, default=0.01)

    p = add("predict", cmd_predict, help="posterior predictive summaries")
    p.add_argument("--chain", required=True)
    p.add_argument("--x", required=True, help="CSV of points, header x1..xp")
    p.add_argument("--name", default="predictions.csv")

    p = add("diagnose", cmd_diagnose, help="batched mixing diagnostics")
    p.add_argument("--chain", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--batch-size", type=int, default=100)
    p.add_argument("--name", default="diagnostics.csv")

    p = add("study", cmd_study, help="accuracy/mixing simulation study")
    p.add_argument("--p-values", type=int, nargs="+", default=[5])
    p.add_argument("--datasets", type=int, default=2)
    p.add_argument("--n", type=int, default=200)
    p.add_argument("--m-test", type=int, default=200)
    p.add_argument("--samplers", nargs="+",
                   default=["blocked-large", "blocked-auto"])
    p.add_argument("--iterations", type=int, default=20_000)
    p.add_argument("--burn-in", type=int, default=5_000)
    p.add_argument("--batch-size", type=int, default=100)
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--mixing", action="store_true")

    return parser


def dispatch(argv) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if not getattr(args, "subcommand", None):
        parser.print_usage(sys.stderr)
        return 2
    sub_parser = parser.subparser_map[args.subcommand]
    try:
        args = _apply_config(args, sub_parser, argv)
        return args.func(args)
    except ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return 2
    except (NumericalError, MatrixError, FloatingPointError) as e:
        print(f"numerical error: {e}", file=sys.stderr)
        return 3
    except OSError as e:
        print(f"i/o error: {e}", file=sys.stderr)
        return 4
    except EdpmError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()

"""Command-line front end: ``tpt test | learn | fool | lift | signapprox | params | report``.

Every command prints its result payload as JSON on stdout.  With ``--out``
it also writes a run record ``<command>-<seed>.json`` holding the config,
the seed, a hash of the inputs and the payload.  Exit codes: 0 success,
1 tester rejection, 2 any error (with a JSON error object on stderr).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from tpt import __version__
from tpt.algebra import Polynomial
from tpt.distributions import DiscreteDistribution, gauss_hermite_product, make_rng, sample_gaussian, spawn_seeds
from tpt.errors import TptError
from tpt.fooling import build_p_delta, fooling_gap, hat_lift
from tpt.learner import LabeledSet, LabelModel, LearnConfig, draw_labeled, empirical_loss, random_ptf, testable_learn
from tpt.serialize import content_hash, dumps, format_float, read_samples, samples_to_csv, write_text
from tpt.signapprox import SUITE, QuadratureGrid, impossibility_suite, suite_to_csv
from tpt.tester import required_samples, tamm_accept, theory_parameters

EXIT_OK, EXIT_REJECT, EXIT_ERROR = 0, 1, 2
COMMANDS = ("test", "learn", "fool", "lift", "signapprox", "params", "report")
_GLOBAL_DESTS = {"config", "out", "verify_repro", "workers", "record_time", "command"}


class ConfigError(TptError, ValueError):
    pass


def parse_int_list(text) -> list[int]:
    """``"0..19"`` (inclusive), ``"1,5,10"`` or a JSON list of ints."""
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    text = str(text).strip()
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            lo, hi = part.split("..", 1)
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    if not out:
        raise ConfigError(f"empty integer list {text!r}")
    return out


# -- command bodies ---------------------------------------------------------------
# Each returns (payload, exit_code, input_paths, extra_files) where extra_files
# maps a file-name suffix to text written next to the run record.


def _read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _seed_list(args) -> list[int]:
    return parse_int_list(args.seeds) if args.seeds is not None else [args.seed]


def _test_one(args, seed):
    if args.samples:
        pts, _ = read_samples(args.samples)
    else:
        m = args.m if args.m else required_samples(args.n, args.k, args.eta, args.c).m
        pts = sample_gaussian(args.n, m, seed)
    return tamm_accept(pts, args.k, args.eta).to_dict()


def run_test(args, seed):
    payload = _test_one(args, seed)
    return payload, EXIT_OK if payload["accepted"] else EXIT_REJECT, [args.samples], {}


def _learn_data(args, seed):
    if args.data:
        pts, labels = read_samples(args.data)
        if labels is None:
            raise ConfigError(f"{args.data} has no label column")
        return LabeledSet(pts, labels), None
    s_ptf, s_data = spawn_seeds(seed, 2)
    planted = random_ptf(args.n, args.d, make_rng(s_ptf))
    model = LabelModel("planted", planted, rho=args.flip_rate)
    return draw_labeled(args.n, args.m, model, s_data), planted


def run_learn(args, seed):
    data, planted = _learn_data(args, seed)
    train, holdout = data.split()
    cfg = LearnConfig(k=args.k, eta=args.eta, basis=args.basis)
    outcome = testable_learn(train, args.d, args.epsilon, cfg)
    payload = outcome.to_dict()
    payload["m_train"] = train.m
    payload["m_holdout"] = holdout.m
    if outcome.accepted and holdout.m:
        payload["holdout_loss"] = empirical_loss(outcome.classifier, holdout)
    if planted is not None:
        payload["planted"] = planted.to_dict()
        if holdout.m:
            payload["planted_holdout_loss"] = empirical_loss(lambda x: np.where(planted.evaluate(x) >= 0, 1, -1), holdout)
    return payload, EXIT_OK if outcome.accepted else EXIT_REJECT, [args.data], {}


def run_fool(args, seed):
    if args.dist:
        D = DiscreteDistribution.from_dict(_read_json(args.dist))
    else:
        D = gauss_hermite_product(args.n, args.gh_nodes)
    p = Polynomial.from_dict(_read_json(args.ptf))
    rep = fooling_gap(p, D, args.mc, seed, k=args.k, ptf_id=Path(args.ptf).stem)
    return rep.to_dict(), EXIT_OK, [args.dist, args.ptf], {}


def run_lift(args, seed):
    pts, labels = read_samples(args.data)
    lifted = hat_lift(pts, args.N, seed)
    recon = lifted.reshape(pts.shape[0], pts.shape[1], args.N).sum(axis=2) / np.sqrt(args.N)
    payload = {
        "N": args.N,
        "m": pts.shape[0],
        "n": pts.shape[1],
        "lifted_dim": lifted.shape[1],
        "max_reconstruction_error": float(np.max(np.abs(recon - pts))) if pts.size else 0.0,
    }
    extra = {"-lifted.csv": samples_to_csv(lifted, labels)}
    if args.p:
        pd = build_p_delta(Polynomial.from_dict(_read_json(args.p)), args.N)
        payload["p_delta_terms"] = len(pd)
        payload["p_delta_degree"] = pd.degree
        extra["-p_delta.json"] = dumps(pd.to_dict()) + "\n"
    return payload, EXIT_OK, [args.data, args.p], extra


def run_signapprox(args, seed):
    suite = list(SUITE) if args.suite == "default" else [s.strip() for s in args.suite.split(",")]
    unknown = [s for s in suite if s not in SUITE]
    if unknown:
        raise ConfigError(f"unknown suite entries {unknown}; choose from {list(SUITE)}")
    grid = QuadratureGrid(R=args.range, nodes=args.nodes)
    rows = impossibility_suite(parse_int_list(args.degrees), grid, suite, workers=args.workers)
    return {"rows": rows}, EXIT_OK, [], {".csv": suite_to_csv(rows)}


def run_params(args, seed):
    tp = theory_parameters(args.d, args.epsilon, args.n, args.c1, args.c2, args.c)
    return tp.to_dict(), EXIT_OK, [], {}


def _flatten(prefix: str, obj, out: dict) -> None:
    if isinstance(obj, dict):
        for k, v in obj.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    elif isinstance(obj, list):
        out[prefix] = dumps(obj, indent=None)
    elif isinstance(obj, float):
        out[prefix] = format_float(obj)
    else:
        out[prefix] = "" if obj is None else str(obj)


def _accept_flag(payload: dict):
    if "accepted" in payload:
        return bool(payload["accepted"])
    if "status" in payload:
        return payload["status"] == "Accepted"
    return None


def build_report(run_dir) -> tuple[dict[str, str], int]:
    """Flatten the run records in ``run_dir`` into CSV texts keyed by file name."""
    run_dir = Path(run_dir)
    if not run_dir.is_dir():
        raise ConfigError(f"{run_dir} is not a directory")
    warnings = 0
    by_cmd: dict[str, list[tuple[str, dict]]] = {}
    index_rows = []
    for path in sorted(run_dir.glob("*.json")):
        try:
            rec = _read_json(path)
            cmd, payload = rec["command"], rec["payload"]
            if cmd not in COMMANDS or not isinstance(payload, dict):
                raise ValueError("not a run record")
        except (ValueError, KeyError, TypeError, OSError) as exc:
            if path.name.endswith("-p_delta.json"):
                continue
            print(f"warning: skipping {path.name}: {exc}", file=sys.stderr)
            warnings += 1
            continue
        seed = str(rec.get("seed", ""))
        by_cmd.setdefault(cmd, []).append((seed, payload))
        index_rows.append([cmd, seed, path.name])

    def seed_key(item):
        seed = item[0]
        return (0, int(seed), "") if seed.lstrip("-").isdigit() else (1, 0, seed)

    for records in by_cmd.values():
        records.sort(key=seed_key)
    files = {}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["command", "seed", "file"])
    w.writerows(index_rows)
    files["runs.csv"] = buf.getvalue()

    for cmd, records in by_cmd.items():
        flat = []
        for seed, payload in records:
            row: dict[str, str] = {}
            _flatten("", payload, row)
            flat.append((seed, row, _accept_flag(payload)))
        cols = sorted({c for _, row, _ in flat for c in row})
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["seed", *cols])
        for seed, row, _ in flat:
            w.writerow([seed, *(row.get(c, "") for c in cols)])
        flags = [f for _, _, f in flat if f is not None]
        if flags:
            summary = {c: "" for c in cols}
            key = "accepted" if "accepted" in cols else "status"
            summary[key] = format_float(sum(flags) / len(flags))
            w.writerow(["summary", *(summary[c] for c in cols)])
        files[f"{cmd}.csv"] = buf.getvalue()
    return files, warnings


def run_report(args, seed):
    files, warnings = build_report(args.dir)
    return {"files": sorted(files), "warnings": warnings}, EXIT_OK, [], {"__files__": files}


RUNNERS = {
    "test": run_test,
    "learn": run_learn,
    "fool": run_fool,
    "lift": run_lift,
    "signapprox": run_signapprox,
    "params": run_params,
    "report": run_report,
}


# -- parsing and validation -----------------------------------------------------------


def _add_common(p: argparse.ArgumentParser, seeds: bool = False) -> None:
    p.add_argument("--config", help="JSON file whose keys override the flags")
    p.add_argument("--out", help="output directory for run records (signapprox also accepts a .csv path)")
    p.add_argument("--seed", type=int, default=0)
    if seeds:
        p.add_argument("--seeds", help="seed sweep, e.g. 0..19 or 1,2,3; one record per seed")
    p.add_argument("--workers", type=int, default=None, help="worker processes for sweeps (default: TPT_WORKERS or 1)")
    p.add_argument("--verify-repro", action="store_true", help="run twice and require byte-identical payloads")
    p.add_argument("--record-time", action="store_true", help="add wall time to run records (breaks byte stability)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="tpt", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"tpt {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", help="moment-matching tester on a sample CSV or on fresh Gaussian draws")
    p.add_argument("--samples", help="CSV with header x1..xn[,label]")
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--n", type=int, default=1, help="dimension for Gaussian draws")
    p.add_argument("--m", type=int, default=None, help="sample count for Gaussian draws (default: required_samples)")
    p.add_argument("--c", type=float, default=1.0, help="constant in the sample-size formula")
    _add_common(p, seeds=True)

    p = sub.add_parser("learn", help="tester + L1 regression + rounding")
    p.add_argument("--data", help="labeled CSV; split 50/50 into train and holdout")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--eta", type=float, required=True)
    p.add_argument("--epsilon", type=float, default=0.1)
    p.add_argument("--n", type=int, default=2, help="dimension of synthetic data")
    p.add_argument("--m", type=int, default=10000, help="train + holdout size of synthetic data")
    p.add_argument("--flip-rate", type=float, default=0.05)
    p.add_argument("--basis", choices=("monomial", "hermite"), default="monomial")
    _add_common(p, seeds=True)

    p = sub.add_parser("fool", help="fooling gap of a PTF against a finite distribution")
    p.add_argument("--dist", help="distribution JSON {n, points, weights}")
    p.add_argument("--n", type=int, default=1, help="dimension of the built-in Gauss-Hermite rule")
    p.add_argument("--gh-nodes", type=int, default=4, help="nodes per axis of the built-in rule")
    p.add_argument("--ptf", required=True, help="polynomial JSON {n, terms}")
    p.add_argument("--mc", type=int, default=10**6)
    p.add_argument("--k", type=int, default=None, help="degree for the reported moment slack")
    _add_common(p)

    p = sub.add_parser("lift", help="Gaussian-block lift of a sample, optionally with p_delta")
    p.add_argument("--data", required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--p", help="polynomial JSON to turn into p_delta")
    _add_common(p)

    p = sub.add_parser("signapprox", help="best L1 sign approximation suite")
    p.add_argument("--suite", default="default", help=f"'default' or a comma list of {','.join(SUITE)}")
    p.add_argument("--degrees", default="1..25")
    p.add_argument("--nodes", type=int, default=4096)
    p.add_argument("--range", type=float, default=12.0)
    _add_common(p)

    p = sub.add_parser("params", help="report theory-scale k, eta and m")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--epsilon", type=float, required=True)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--c1", type=float, default=1.0)
    p.add_argument("--c2", type=float, default=1.0)
    _add_common(p)

    p = sub.add_parser("report", help="aggregate a directory of run records into CSVs")
    p.add_argument("--dir", required=True)
    _add_common(p)
    return ap


def _subparser(ap: argparse.ArgumentParser, command: str) -> argparse.ArgumentParser:
    for action in ap._actions:
        if isinstance(action, argparse._SubParsersAction):
            return action.choices[command]
    raise KeyError(command)


def apply_config(ap: argparse.ArgumentParser, args: argparse.Namespace) -> None:
    """Overlay ``--config`` JSON onto the parsed flags, rejecting unknown keys."""
    if not args.config:
        return
    cfg = _read_json(args.config)
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    actions = {a.dest: a for a in _subparser(ap, args.command)._actions if a.dest != "help"}
    for key, value in cfg.items():
        dest = key.replace("-", "_")
        if dest not in actions or dest == "config":
            raise ConfigError(f"unknown config field {key!r} for command {args.command!r}")
        conv = actions[dest].type
        if conv is not None and value is not None and not isinstance(value, (list, dict)):
            try:
                value = conv(value)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"config field {key!r}: {exc}") from exc
        setattr(args, dest, value)


def validate(args: argparse.Namespace) -> None:
    def need(cond, msg):
        if not cond:
            raise ConfigError(msg)

    cmd = args.command
    if args.workers is None:
        args.workers = int(os.environ.get("TPT_WORKERS", "1"))
    need(args.workers >= 1, "workers must be at least 1")
    if getattr(args, "seeds", None) is not None:
        parse_int_list(args.seeds)
    if cmd == "test":
        need(args.k >= 0, "k must be non-negative")
        need(args.eta > 0, "eta must be positive")
        need(args.samples or args.n >= 1, "n must be positive")
        need(args.samples or args.k >= 1 or args.m, "k = 0 needs an explicit --m")
        need(args.m is None or args.m >= 1, "m must be positive")
        need(args.c > 0, "c must be positive")
    elif cmd == "learn":
        need(args.d >= 1, "d must be positive")
        need(args.k >= args.d, "k must be at least d")
        need(args.eta > 0, "eta must be positive")
        need(args.epsilon > 0, "epsilon must be positive")
        need(args.data or (args.n >= 1 and args.m >= 2), "synthetic data needs n >= 1 and m >= 2")
        need(0 <= args.flip_rate <= 0.5, "flip rate must lie in [0, 1/2]")
    elif cmd == "fool":
        need(args.mc >= 1000, "use at least 1000 Monte Carlo samples")
        need(args.dist or 1 <= args.gh_nodes <= 64, "gh-nodes must lie in [1, 64]")
        need(args.k is None or args.k >= 0, "k must be non-negative")
    elif cmd == "lift":
        need(args.N >= 2, "N must be at least 2")
    elif cmd == "signapprox":
        degs = parse_int_list(args.degrees)
        need(degs == sorted(degs) and min(degs) >= 0 and max(degs) <= 30, "degrees must be ascending within [0, 30]")
        need(args.nodes >= 64, "nodes must be at least 64")
        need(0 < args.range < float("inf"), "range must be finite and positive")
    elif cmd == "params":
        need(args.d >= 1, "d must be positive")
        need(0 < args.epsilon < 1, "epsilon must lie in (0, 1)")
        need(args.n >= 1, "n must be positive")
        need(min(args.c, args.c1, args.c2) > 0, "constants must be positive")


def config_snapshot(args: argparse.Namespace) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k not in _GLOBAL_DESTS and k != "seeds"}


def _input_hash(paths, config: dict) -> str:
    chunks = [dumps(config, indent=None).encode()]
    for path in paths:
        if path:
            chunks.append(Path(path).read_bytes())
    return content_hash(b"\0".join(chunks))


def _execute(args_dict: dict, seed: int):
    args = argparse.Namespace(**args_dict)
    return RUNNERS[args.command](args, seed)


def _payload_text(payload) -> str:
    return dumps(payload) + "\n"


def _run_seeds(args, seeds):
    jobs = [(vars(args), s) for s in seeds]
    if args.workers > 1 and len(jobs) > 1 and args.command in ("test", "learn"):
        with ProcessPoolExecutor(max_workers=args.workers) as pool:
            return list(pool.map(_execute, *zip(*jobs)))
    return [_execute(a, s) for a, s in jobs]


def dispatch(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        if exc.code in (0, None):
            return EXIT_OK
        _error("UsageError", "invalid command line")
        return EXIT_ERROR
    try:
        apply_config(ap, args)
        validate(args)
        if args.command == "report" and not args.out:
            args.out = args.dir
        seeds = _seed_list(args) if hasattr(args, "seeds") else [args.seed]
        t0 = time.perf_counter()
        results = _run_seeds(args, seeds)
        wall = time.perf_counter() - t0
        if args.verify_repro:
            again = _run_seeds(args, seeds)
            for s, r1, r2 in zip(seeds, results, again):
                h1, h2 = content_hash(_payload_text(r1[0])), content_hash(_payload_text(r2[0]))
                if h1 != h2:
                    raise ConfigError(f"reproducibility check failed for seed {s}: {h1} != {h2}")
            print(f"verify-repro: {len(seeds)} payload(s) identical", file=sys.stderr)
        _write_outputs(args, seeds, results, wall)
        if len(results) == 1:
            sys.stdout.write(_payload_text(results[0][0]))
        else:
            sys.stdout.write(_payload_text([{"seed": s, "payload": r[0]} for s, r in zip(seeds, results)]))
        return max(r[1] for r in results)
    except Exception as exc:  # every failure maps to exit code 2
        _error(type(exc).__name__, str(exc))
        return EXIT_ERROR


def _write_outputs(args, seeds, results, wall) -> None:
    if not args.out:
        return
    out = Path(args.out)
    if args.command == "signapprox" and out.suffix == ".csv":
        out.parent.mkdir(parents=True, exist_ok=True)
        write_text(out, results[0][3][".csv"])
        return
    out.mkdir(parents=True, exist_ok=True)
    config = config_snapshot(args)
    for seed, (payload, code, inputs, extra) in zip(seeds, results):
        if "__files__" in extra:
            for name, text in extra["__files__"].items():
                write_text(out / name, text)
            continue
        stem = f"{args.command}-{seed}"
        record = {
            "command": args.command,
            "seed": seed,
            "config": config,
            "input_hash": _input_hash(inputs, config),
            "payload": payload,
        }
        if args.record_time:
            record["wall_time"] = wall
        write_text(out / f"{stem}.json", dumps(record) + "\n")
        for suffix, text in extra.items():
            write_text(out / f"{stem}{suffix}", text)


def _error(kind: str, message: str) -> None:
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")


def main(argv=None) -> None:
    sys.exit(dispatch(argv))


if __name__ == "__main__":
    main()

"""Command-line scenario runner.

Subcommands:

``analyze``
    Class distributions, the blocking-vs-lambda sweep and one JSON report
    per sweep point.
``simulate``
    Replicated simulation at every lambda of the config, next to the
    analytical report.
``fit-interference``
    Fitted lognormal ISR model per link with the KS distance to samples
    drawn from the exact definition.

All outputs are collected in memory and written at the end, each file via a
temporary name and an atomic rename.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

from . import __version__
from .config import ScenarioConfig, load_config
from .errors import ConfigError
from .erlang import analyze as analyze_point
from .pipeline import analysis_inputs, class_distributions, fit_interference
from .simulator import MODES, STREAMS, REPORT_FIELDS, SimConfig, run

OUT_ENV = "RELAYBLOCK_OUT"
DEFAULT_OUT = "relayblock-out"

SWEEP_COLUMNS = [
    "lambda",
    "p_b_d",
    "p_b_hbr",
    "p_b_hrm",
    "p_b_h",
    "p_b_overall",
    "tail_block_bs_ms",
    "tail_block_bs_rs",
    "tail_block_rs_ms",
]


def fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return format(x, ".17g")
    return str(x)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    return buf.getvalue()


def write_outputs(out_dir: Path, files: dict[str, str]) -> None:
    """Write every file atomically: tmp sibling then rename."""
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        path = out_dir / name
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_name(f".{path.name}.tmp")
        tmp.write_text(text)
        os.replace(tmp, path)


def _lam_tag(lam: float) -> str:
    return fmt(float(lam)).replace(".", "p").replace("-", "m")


def cmd_analyze(cfg: ScenarioConfig, threads: int) -> dict[str, str]:
    files = {"effective_config.txt": cfg.canonical()}
    dists = class_distributions(cfg)
    for kind, dist in dists.items():
        rows = [(r + 1, int(d), float(p)) for r, (d, p) in enumerate(zip(dist.demands, dist.probabilities))]
        files[f"class_distribution_{kind.value}.csv"] = _csv(["class", "demand", "probability"], rows)

    tag = cfg.digest()

    def point(lam):
        return analyze_point(analysis_inputs(cfg, lam, dists), scenario=tag)

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            reports = list(ex.map(point, cfg.lambdas))
    else:
        reports = [point(lam) for lam in cfg.lambdas]

    rows = [[lam] + [getattr(r, c) for c in SWEEP_COLUMNS[1:]] for lam, r in zip(cfg.lambdas, reports)]
    files["blocking_sweep.csv"] = _csv(SWEEP_COLUMNS, rows)
    for lam, r in zip(cfg.lambdas, reports):
        body = r.to_json_dict()
        body["config"] = cfg.canonical()
        files[f"reports/report_lambda_{_lam_tag(lam)}.json"] = json.dumps(body, indent=2, sort_keys=True) + "\n"
    return files


def cmd_simulate(cfg: ScenarioConfig, threads: int, modes: tuple[str, ...]) -> dict[str, str]:
    files = {"effective_config.txt": cfg.canonical()}
    dists = class_distributions(cfg)
    base = SimConfig(
        horizon=cfg.sim_horizon,
        warmup=cfg.sim_warmup,
        replications=cfg.sim_replications,
        base_seed=cfg.sim_seed,
        holding_model=cfg.holding_model,
    )
    rep_rows, est_rows, cmp_rows = [], [], []
    for lam in cfg.lambdas:
        inputs = analysis_inputs(cfg, lam, dists)
        report = analyze_point(inputs, scenario=cfg.digest())
        est = {m: run(inputs, replace(base, mode=m), workers=threads) for m in modes}
        for m, e in est.items():
            for rep, stream, off, blk, frac in e.rows():
                rep_rows.append((m, lam, rep, stream, off, blk, frac))
            for stream, s in e.streams.items():
                est_rows.append((m, lam, stream, s.mean, s.half_width, s.offered, s.blocked, s.carried, s.empty))
        for stream in STREAMS:
            a = getattr(report, REPORT_FIELDS[stream])
            row = [lam, stream, a]
            for m in MODES:
                if m in est:
                    s = est[m][stream]
                    row += [s.mean, s.half_width, "" if s.empty else s.covers(a)]
                else:
                    row += ["", "", ""]
            gap = a - est["coupled"][stream].mean if "coupled" in est else ""
            cmp_rows.append(row + [gap])
    files["sim_replications.csv"] = _csv(
        ["mode", "lambda", "replication", "stream", "offered", "blocked", "fraction"], rep_rows
    )
    files["sim_estimates.csv"] = _csv(
        ["mode", "lambda", "stream", "mean", "half_width", "offered", "blocked", "carried", "empty"], est_rows
    )
    header = ["lambda", "stream", "analytic"]
    for m in MODES:
        header += [f"{m}_mean", f"{m}_half_width", f"analytic_in_{m}_ci"]
    files["comparison.csv"] = _csv(header + ["gap_analytic_minus_coupled"], cmp_rows)
    return files


def cmd_fit(cfg: ScenarioConfig, samples: int | None) -> dict[str, str]:
    fits = fit_interference(cfg, samples=samples)
    rows = [(f.link.value, f.model.m1, f.model.m2, f.model.mu_i, f.model.sigma_i, f.ks_distance) for f in fits]
    return {
        "effective_config.txt": cfg.canonical(),
        "interference_models.csv": _csv(
            ["link", "m1", "m2", "mu_I", "sigma_I", "ks_distance_vs_exact_sampling"], rows
        ),
    }


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="relayblock", description="Blocking analysis for relay-based OFDMA cells.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="scenario file (defaults used when omitted)")
        sp.add_argument("--out", help=f"output directory (default ${OUT_ENV} or ./{DEFAULT_OUT})")
        sp.add_argument("--seed", type=int, help="override the seed in the config")
        sp.add_argument("--threads", type=int, default=1, help="worker count (default 1)")

    common(sub.add_parser("analyze", help="analytical blocking sweep"))
    sp = sub.add_parser("simulate", help="simulation next to the analysis")
    common(sp)
    sp.add_argument("--mode", choices=("both",) + MODES, default="both")
    sp = sub.add_parser("fit-interference", help="per-link ISR model and fit quality")
    common(sp)
    sp.add_argument("--samples", type=int, help="exact samples for the KS distance")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else ScenarioConfig()
        if args.threads < 1:
            raise ConfigError("--threads must be >= 1")
        if args.command == "analyze":
            files = cmd_analyze(cfg, args.threads)
        elif args.command == "simulate":
            if args.seed is not None:
                cfg = replace(cfg, sim_seed=args.seed)
            modes = MODES if args.mode == "both" else (args.mode,)
            files = cmd_simulate(cfg, args.threads, modes)
        else:
            if args.seed is not None:
                cfg = replace(cfg, validation_seed=args.seed)
            if args.samples is not None and args.samples < 1:
                raise ConfigError("--samples must be >= 1")
            files = cmd_fit(cfg, args.samples)
    except ConfigError as exc:
        print(f"relayblock: config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"relayblock: error: {exc}", file=sys.stderr)
        return 1
    out = Path(args.out or os.environ.get(OUT_ENV) or DEFAULT_OUT)
    write_outputs(out, files)
    print(f"wrote {len(files)} files to {out}")
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())


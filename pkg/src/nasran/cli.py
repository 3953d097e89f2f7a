"""Command-line entry point.

Exit codes: 0 success, 2 configuration error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import checkpoint, report
from .config import parse_scenario, write_echo
from .errors import ConfigError, NasranError
from .lstm_core import grad_check, init_model, train
from .metrics import evaluate
from .nas_rapp import candidate_names, candidate_space, nominal_spec
from .ric_sim import ScenarioConfig, initial_search, replay_counterfactual, run_simulation
from .traffic import generate_trace, split_dataset, window_dataset, write_trace_csv

log = logging.getLogger("nasran")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _load_cfg(args) -> ScenarioConfig:
    cfg = parse_scenario(args.scenario) if args.scenario else ScenarioConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    if args.scale is not None:
        cfg = replace(cfg, scale=args.scale)
    if getattr(args, "baseline", None):
        cfg = replace(cfg, baseline=args.baseline)
    if args.out:
        cfg = replace(cfg, output_dir=args.out)
    cfg.validate()
    return cfg


def _out(cfg) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_echo(cfg, out)
    return out


def cmd_generate(args):
    cfg = _load_cfg(args)
    out = _out(cfg)
    series = generate_trace(cfg, cfg.seed_trace, cfg.scenario_id)
    write_trace_csv(series, out / "trace.csv")
    print(f"wrote {len(series)} samples to {out / 'trace.csv'}")


def cmd_train(args):
    cfg = _load_cfg(args)
    arch = args.arch or cfg.policy.regular_model
    spec = nominal_spec(arch, cfg.W)
    out = _out(cfg)
    series = generate_trace(cfg, cfg.seed_trace, cfg.scenario_id)
    ds = window_dataset(series.slice(0, cfg.warmup_steps), cfg.W, spec.d_x)
    train_cfg = replace(cfg.train, seed=cfg.seed_train)
    model, history = train(init_model(spec.scaled(cfg.scale), cfg.seed_search), ds, train_cfg)
    _, held = split_dataset(ds, train_cfg.val_fraction)
    rep = evaluate(model, held)
    checkpoint.save_checkpoint(model, out / f"{arch}.rnls")
    lines = ["epoch,train_loss,val_loss"] + [
        f"{h.epoch},{report.fmt(h.train_loss)},{report.fmt(h.val_loss)}" for h in history]
    (out / f"{arch}.history.csv").write_text("\n".join(lines) + "\n")
    (out / f"{arch}.eval.json").write_text(json.dumps(rep.to_dict(), indent=1) + "\n")
    print(f"{arch}: r2={rep.r2_overall:.4f} mae={rep.mae:.4g} rmse={rep.rmse:.4g}")


def cmd_search(args):
    cfg = _load_cfg(args)
    out = _out(cfg)
    _, outcome = initial_search(cfg)
    report.write_files(out, {
        "search_outcome.json": report.search_outcome_json(outcome),
        "table1.csv": report.table1_csv([outcome.get(n).report for n in candidate_names()
                                          if outcome.get(n).report is not None]),
    })
    models = out / "models"
    models.mkdir(exist_ok=True)
    for r in outcome.ranked:
        checkpoint.save_checkpoint(r.model, models / f"{r.name}.rnls")
    print(f"default: {outcome.selected_default}  critical: {outcome.selected_critical}")
    for r in outcome.ranked:
        print(f"  {r.name:<18} E={r.efficiency:10.4f} r2={r.report.r2_overall:.4f} "
              f"r2_crit={r.report.r2_critical}")


def _print_sim(rep):
    on = rep.online
    print(f"{rep.mode}: online r2={on['r2']:.4f} mae={on['mae']:.4g} switches={rep.switch_count}")
    for b, v in rep.reductions.items():
        print(f"  complexity reduction vs static {b}: {v:.2f}%")


def cmd_simulate(args):
    cfg = _load_cfg(args)
    out = _out(cfg)
    rep = run_simulation(cfg)
    report.emit_report(rep, out)
    _print_sim(rep)


def cmd_counterfactual(args):
    cfg = _load_cfg(args)
    forced = args.arch or cfg.baseline
    if forced not in candidate_names():
        raise ConfigError(f"unknown model {forced!r}; choose from {candidate_names()}", keys=["arch"])
    out = _out(cfg)
    rep = replay_counterfactual(cfg, forced)
    report.emit_report(rep, out)
    _print_sim(rep)


def cmd_gradcheck(args):
    import numpy as np

    specs = [nominal_spec(args.arch)] if args.arch else candidate_space()
    scale = args.scale if args.scale is not None else 0.125
    rng = np.random.default_rng(args.seed or 0)
    results = {}
    for spec in specs:
        small = spec.scaled(scale)
        model = init_model(small, args.seed or 0)
        window = rng.uniform(0, 1, (small.W, small.d_x))
        err = grad_check(model, window, float(rng.uniform(0, 1)), eps=args.eps)
        results[spec.name] = err
        print(f"{spec.name:<18} dims={small.hidden_dims} max_rel_err={err:.3e}")
    if args.out:
        Path(args.out).mkdir(parents=True, exist_ok=True)
        (Path(args.out) / "gradcheck.json").write_text(json.dumps(results, indent=1) + "\n")
    if max(results.values()) >= args.tol:
        print(f"gradient check FAILED (tolerance {args.tol})", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_report(args):
    if not args.out:
        raise ConfigError("report needs --out pointing at a run directory", keys=["out"])
    paths = report.rerender(args.out)
    for p in paths:
        print(f"wrote {p}")


def build_parser():
    p = argparse.ArgumentParser(prog="nasran", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, func, help):
        sp = sub.add_parser(name, help=help)
        sp.set_defaults(func=func)
        sp.add_argument("--scenario", help="scenario file (key = value)")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--seed", type=int, help="override every seed")
        sp.add_argument("--scale", type=float, help="hidden-dim scale factor in (0, 1]")
        sp.add_argument("--arch", choices=candidate_names())
        sp.add_argument("--baseline", choices=candidate_names())
        return sp

    add("generate", cmd_generate, "write a synthetic trace as CSV")
    add("train", cmd_train, "train one architecture on the warmup split")
    add("search", cmd_search, "train and rank the six candidates")
    add("simulate", cmd_simulate, "run the closed-loop simulation")
    add("counterfactual", cmd_counterfactual, "replay with one pinned model")
    gc = add("gradcheck", cmd_gradcheck, "verify BPTT gradients by central differences")
    gc.add_argument("--eps", type=float, default=1e-5)
    gc.add_argument("--tol", type=float, default=1e-4)
    add("report", cmd_report, "re-render CSVs from <out>/report.json")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args) or EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NasranError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

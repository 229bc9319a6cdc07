"""Command line entry point: ``htmfp <command> ...``."""
from __future__ import annotations

import argparse
import csv
import logging
import sys
from pathlib import Path

from . import evaluation as ev
from .global_prediction import SINGLE, STRATEGIES, VOTE
from .pipeline import EPSILONS, FEATURES, ModelSet, predict, train
from .testbed import campaign_scenarios, run_scenario
from .traceio import format_scenario, iso, ranges_for, read_scenario, read_trace, write_trace

log = logging.getLogger("htmfp")
TRAIN_NAMES = ("train_week1", "train_week2")


def _simulate(args) -> int:
    out = Path(args.out)
    if args.campaign:
        configs = campaign_scenarios(args.seed, args.kpis_per_resource)
    elif args.scenario:
        configs = [read_scenario(args.scenario)]
    else:
        raise SystemExit("simulate: give --scenario FILE or --campaign")
    (out / "scenarios").mkdir(parents=True, exist_ok=True)
    for cfg in configs:
        trace = run_scenario(cfg)
        write_trace(trace, out)
        (out / "scenarios" / f"{cfg.name}.scenario").write_text(format_scenario(cfg))
        f = trace.failure
        log.info("%s: %d ticks, %s", cfg.name, len(trace.timestamps),
                 f"{f.kind} failure at tick {f.tick}" if f else "no failure")
    return 0


def _evaluation_traces(directory: Path) -> list[Path]:
    paths = sorted(p for p in Path(directory).glob("*.csv")
                   if not p.name.endswith(".truth.csv") and p.stem not in TRAIN_NAMES)
    if not paths:
        raise SystemExit(f"no evaluation traces in {directory}")
    return paths


def _train(args) -> int:
    d = Path(args.traces)
    missing = [n for n in TRAIN_NAMES if not (d / f"{n}.csv").exists()]
    if missing:
        raise SystemExit(f"{d}: missing training traces {missing}")
    w1, w2 = (read_trace(d / f"{n}.csv") for n in TRAIN_NAMES)
    for w in (w1, w2):
        if w.truth.faulty:
            raise SystemExit(f"{w.name}: training traces must be failure-free")
    log.info("training %d detectors on %d + %d ticks", len(w1.columns), len(w1.timestamps),
             len(w2.timestamps))
    models = train(w1, w2, ranges_for(w1.columns), seed=args.seed, nu=args.nu, gamma=args.gamma,
                   features=args.features)
    models.save(Path(args.models))
    log.info("models written to %s", args.models)
    return 0


def _predict(args) -> int:
    k = args.x if args.strategy == SINGLE else args.y
    if k is None:
        raise SystemExit(f"--{'x' if args.strategy == SINGLE else 'y'} is required for {args.strategy}")
    models = ModelSet.load(Path(args.models))
    trace = read_trace(Path(args.trace))
    run, local, preds = predict(models, trace, args.epsilon, args.n, args.strategy, k)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with open(out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp", "strategy", "detail"])
        for p in preds:
            w.writerow([iso(trace.timestamps[p.tick]), p.strategy, " ".join(p.detail)])
    if args.verdicts:
        flags = run.flags(args.epsilon, models.rule)
        with open(args.verdicts, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["timestamp", "resource", "kpi", "raw_score", "likelihood", "flag"])
            for t, ts in enumerate(trace.timestamps):
                for j, col in enumerate(models.columns):
                    r, kpi = col.split(".", 1)
                    w.writerow([iso(ts), r, kpi, f"{run.raw[t, j]:.6f}",
                                f"{run.likelihood[t, j]:.6f}", int(flags[t, j])])
    if trace.truth.faulty or trace.truth.failure is not None:
        o = ev.evaluate_run([p.tick for p in preds], trace.truth, trace.name)
        lead = f", lead {o.lead_min:.0f} min" if o.lead_min is not None else ""
        print(f"{trace.name}: {'predicted' if o.predicted else 'missed'}{lead}")
    else:
        print(f"{trace.name}: {len(preds)} prediction(s) on a failure-free run")
    return 0


def _outcomes_path(report: Path) -> Path:
    return report.with_name(report.stem + ".outcomes.csv")


def _flags_path(report: Path) -> Path:
    return report.with_name(report.stem + ".flags.csv")


def _sweep(args) -> int:
    models = ModelSet.load(Path(args.models))
    traces = [read_trace(p) for p in _evaluation_traces(Path(args.traces))]
    result = ev.sweep(models, traces, progress=lambda name: log.info("replaying %s", name))
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(ev.report_csv(result.reports))
    _outcomes_path(out).write_text(ev.outcomes_csv(result))
    _flags_path(out).write_text(ev.flag_counts_csv(result.flag_counts))
    best = result.best()
    log.info("best: %s eps=%.2f n=%d k=%d  P=%.3f R=%.3f F=%.3f", best.config.strategy,
             best.config.epsilon, best.config.n, best.config.k, best.precision, best.recall,
             best.f_measure)
    return 0


def _report(args) -> int:
    path = Path(args.input)
    reports = ev.read_report_csv(path)
    outcomes_path = _outcomes_path(path)
    outcomes = ev.read_outcomes_csv(outcomes_path) if outcomes_path.exists() else None
    aggregates = ev.epsilon_aggregates(reports)
    print(ev.aggregates_csv(aggregates), end="")
    best = max(reports, key=lambda r: (r.f_measure, r.recall))
    print(f"\nbest configuration: {best.config.strategy} eps={best.config.epsilon:.2f} "
          f"n={best.config.n} x_or_y={best.config.k} precision={best.precision:.3f} "
          f"recall={best.recall:.3f} f_measure={best.f_measure:.3f}")
    rows = None
    if args.per_fault:
        if outcomes is None:
            raise SystemExit(f"--per-fault needs {outcomes_path} (written by sweep)")
        rows = ev.per_fault_report(o for runs in outcomes.values() for o in runs)
        print()
        print(ev.format_fault_table(rows))
    if args.figures:
        from . import plotting

        fig_dir = Path(args.figures)
        fig_dir.mkdir(parents=True, exist_ok=True)
        (fig_dir / "epsilon_aggregates.csv").write_text(ev.aggregates_csv(aggregates))
        written = [plotting.plot_epsilon_performance(reports, fig_dir / "performance_by_epsilon.png")]
        if outcomes is not None:
            written.append(plotting.plot_lead_times(outcomes, fig_dir / "lead_time_by_epsilon.png"))
            rows = rows or ev.per_fault_report(o for runs in outcomes.values() for o in runs)
            (fig_dir / "per_fault.csv").write_text(ev.fault_csv(rows))
            written.append(plotting.plot_fault_table(rows, fig_dir / "per_fault.png"))
        for p in written:
            log.info("wrote %s", p)
    return 0


def _campaign(args) -> int:
    out = Path(args.out)
    traces = out / "traces"
    _simulate(argparse.Namespace(out=traces, campaign=True, scenario=None, seed=args.seed,
                                 kpis_per_resource=args.kpis_per_resource))
    _train(argparse.Namespace(traces=traces, models=out / "models", seed=args.seed,
                              nu=args.nu, gamma=args.gamma, features="flags"))
    _sweep(argparse.Namespace(traces=traces, models=out / "models", out=out / "report.csv"))
    return _report(argparse.Namespace(input=out / "report.csv", per_fault=True,
                                      figures=out / "figures"))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="htmfp", description=__doc__)
    p.add_argument("-q", "--quiet", action="store_true", help="only print results")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="generate traces and ground truth")
    s.add_argument("--scenario", help="scenario file (key = value lines)")
    s.add_argument("--campaign", action="store_true",
                   help="the two training weeks plus 12 faulty and 12 clean runs")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--kpis-per-resource", type=int, default=5)
    s.add_argument("--out", required=True)
    s.set_defaults(func=_simulate)

    t = sub.add_parser("train", help="train detectors and per-resource SVMs")
    t.add_argument("--traces", required=True)
    t.add_argument("--models", required=True)
    t.add_argument("--seed", type=int, default=0)
    t.add_argument("--nu", type=float, default=0.05)
    t.add_argument("--gamma", type=float, default=None)
    t.add_argument("--features", choices=FEATURES, default="flags",
                   help="SVM inputs: anomaly flags or flag-gated likelihoods")
    t.set_defaults(func=_train)

    r = sub.add_parser("predict", help="run the full pipeline over one trace")
    r.add_argument("--trace", required=True)
    r.add_argument("--models", required=True)
    r.add_argument("--epsilon", type=float, required=True, choices=EPSILONS)
    r.add_argument("--n", type=int, default=1)
    r.add_argument("--strategy", choices=STRATEGIES, default=VOTE)
    r.add_argument("--x", type=int)
    r.add_argument("--y", type=int)
    r.add_argument("--out", required=True, help="prediction log CSV")
    r.add_argument("--verdicts", help="optional per-KPI verdict log CSV")
    r.set_defaults(func=_predict)

    w = sub.add_parser("sweep", help="score all 72 configurations")
    w.add_argument("--traces", required=True)
    w.add_argument("--models", required=True)
    w.add_argument("--out", required=True)
    w.set_defaults(func=_sweep)

    o = sub.add_parser("report", help="summarise a sweep report")
    o.add_argument("--in", dest="input", required=True)
    o.add_argument("--per-fault", action="store_true")
    o.add_argument("--figures", help="directory for PNG figures and aggregate CSVs")
    o.set_defaults(func=_report)

    c = sub.add_parser("campaign", help="simulate, train, sweep and report in one go")
    c.add_argument("--out", required=True)
    c.add_argument("--seed", type=int, default=0)
    c.add_argument("--kpis-per-resource", type=int, default=5)
    c.add_argument("--nu", type=float, default=0.05)
    c.add_argument("--gamma", type=float, default=None)
    c.set_defaults(func=_campaign)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())

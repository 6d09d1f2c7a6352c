"""Command-line entry point.

    martlab <experiment> [--config FILE] [--seed N] [--paths N] [--grid N]
            [--p LIST] [--out DIR] [--workers N] ...
    martlab sweep --config FILE --vary key=v1;v2;v3
    martlab list

Exit status is nonzero iff any PASS-gated record fails.
"""

import argparse
import sys

from martlab import harness


def _add_override_args(ap: argparse.ArgumentParser) -> None:
    ap.add_argument("--config", default=None, help="flat key=value config file")
    ap.add_argument("--seed", type=int, default=None)
    ap.add_argument("--paths", type=int, default=None)
    ap.add_argument("--grid", type=int, default=None)
    ap.add_argument("--steps", type=int, default=None)
    ap.add_argument("--p", default=None, help="comma list, fractions allowed (4/3,2,4)")
    ap.add_argument("--out", default=None)
    ap.add_argument("--workers", type=int, default=None)
    ap.add_argument("--T", dest="T", type=float, default=None)
    ap.add_argument("--d", type=int, default=None)
    ap.add_argument("--bandwidth", type=int, default=None)
    ap.add_argument("--bins", type=int, default=None)
    ap.add_argument("--depth", type=int, default=None)
    ap.add_argument("--instances", type=int, default=None)
    ap.add_argument("--ensembles", type=int, default=None)
    ap.add_argument("--checkpoints", type=int, default=None)
    ap.add_argument("--A", default=None)
    ap.add_argument("--V", default=None)
    ap.add_argument("--a", default=None)
    ap.add_argument("--f", default=None)


def _overrides(ns: argparse.Namespace) -> dict:
    keys = ("seed", "paths", "grid", "steps", "p", "out", "workers", "T", "d",
            "bandwidth", "bins", "depth", "instances", "ensembles",
            "checkpoints", "A", "V", "a", "f")
    return {k: getattr(ns, k) for k in keys}


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    parser = argparse.ArgumentParser(prog="martlab", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    for name in sorted(harness.EXPERIMENTS):
        ap = sub.add_parser(name, help=f"run the {name} experiment")
        _add_override_args(ap)

    ap_sweep = sub.add_parser("sweep", help="run one experiment over varied values")
    _add_override_args(ap_sweep)
    ap_sweep.add_argument("--experiment", required=False, default=None)
    ap_sweep.add_argument("--vary", required=True,
                          help="key=v1;v2;v3 applied one run at a time")

    sub.add_parser("list", help="list available experiments")

    ns = parser.parse_args(argv)

    if ns.command == "list":
        for name in sorted(harness.EXPERIMENTS):
            print(name)
        return 0

    if ns.command == "sweep":
        over = _overrides(ns)
        if ns.experiment:
            over["experiment"] = ns.experiment
        base = harness.spec_from_config(ns.config, over)
        key, _, vals = ns.vary.partition("=")
        specs = []
        for i, v in enumerate(vals.split(";")):
            o = dict(over)
            o[key] = v
            o["out"] = f"{base.out}/sweep-{key}-{i}"
            o.setdefault("experiment", base.experiment)
            o["experiment"] = o.get("experiment") or base.experiment
            specs.append(harness.spec_from_config(ns.config, o))
        reports = harness.sweep(specs)
        fails = sum(r["n_fail"] for r in reports)
        for r in reports:
            _print_report(r)
        return 1 if fails else 0

    over = _overrides(ns)
    over["experiment"] = ns.command
    spec = harness.spec_from_config(ns.config, over)
    report = harness.run(spec)
    _print_report(report)
    return 1 if report["n_fail"] else 0


def _print_report(report: dict) -> None:
    print(f"[{report['experiment']}] backend={report['backend']} "
          f"fingerprint={report['fingerprint']} wall={report['walltime_s']}s")
    for r in report["records"]:
        est = r.get("estimate")
        est_s = f"{est:.6g}" if isinstance(est, float) else str(est)
        bound = r.get("bound")
        bound_s = f" bound={bound:.6g}" if isinstance(bound, float) else ""
        se = r.get("se")
        se_s = f" se={se:.3g}" if isinstance(se, float) else ""
        print(f"  {r['verdict']:<11} {r['name']:<34} est={est_s}{se_s}{bound_s}")


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point: validate, run and report."""
from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import eventlog, scenario
from .errors import ConfigInvalid, LogFormatError
from .metrics import Metrics, compute_metrics
from .runner import run_scenario

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2

log = logging.getLogger("nrsim")


def _setup_logging():
    level = os.environ.get("NRSIM_LOG", "warning").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _fmt_ms(v):
    return "-" if v is None else f"{v:.0f} ms"


def summary_lines(name: str, seed: int, m: Metrics) -> list[str]:
    return [
        f"scenario          {name} (seed {seed})",
        f"rlfCount          {m.rlf_count}",
        f"reestablishments  {m.reestablish_attempts}",
        f"siReacquisitions  {m.si_reacquisitions}",
        f"registrations     {m.registration_requests}",
        f"missedSiWindows   {m.missed_si_windows}",
        f"dutyCycle         {m.duty_cycle * 100:.3f} %",
        f"connectedUptime   {m.connected_uptime_fraction * 100:.2f} %",
        f"meanTimeToRlf     {_fmt_ms(m.mean_time_to_rlf_ms)}",
    ]


def cmd_validate(args) -> int:
    scn = scenario.load(args.file)
    print(f"{args.file}: ok ({scn.name}, {len(scn.cells)} cells, {len(scn.ues)} UEs, {scn.duration_ms} ms)")
    return EXIT_OK


def _run_one(path: str, out: Path, seed):
    scn = scenario.load(path)
    result = run_scenario(scn, seed)
    out.mkdir(parents=True, exist_ok=True)
    result.log.write(out / "events.log")
    result.metrics.write(out / "metrics.csv")
    return scn.name, result.seed, result.metrics, str(out)


def cmd_run(args) -> int:
    base = Path(args.out)
    # several scenarios share one --out, so each gets its own subdirectory
    outs = [base] if len(args.files) == 1 else [base / Path(f).stem for f in args.files]
    for f in args.files:
        scenario.load(f)  # fail fast on config errors before any run starts
    if args.jobs > 1 and len(args.files) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_one, args.files, outs, [args.seed] * len(outs)))
    else:
        results = [_run_one(f, o, args.seed) for f, o in zip(args.files, outs)]
    for i, (name, seed, m, out) in enumerate(results):
        if i:
            print()
        print("\n".join(summary_lines(name, seed, m)))
        print(f"output            {out}")
    return EXIT_OK


def reacquisition_rows(events) -> list[tuple]:
    rows, last = [], {}
    for e in events:
        if e.kind == "SI_REACQUISITION":
            prev = last.get(e.subject)
            rows.append((e.time, e.subject, e.get("cell"), e.get("cause"), e.get("value_tag"),
                         "" if prev is None else e.time - prev))
            last[e.subject] = e.time
    return rows


def rlf_rows(events) -> list[tuple]:
    return [(e.time, e.subject, e.get("cell"), e.get("connected_ms")) for e in events if e.kind == "RLF"]


def alert_rows(events) -> list[tuple]:
    return [(e.time, e.subject, e.get("detector"), e.get("cell"), e.get("score"))
            for e in events if e.kind == "DETECTOR_ALERT"]


def _table(title, header, rows):
    print(f"\n{title} ({len(rows)})")
    if not rows:
        print("  (none)")
        return
    cells = [header] + [tuple(str(v) for v in r) for r in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    for r in cells:
        print("  " + "  ".join(v.rjust(w) for v, w in zip(r, widths)))


REACQ_HEADER = ("time_ms", "ue", "cell", "cause", "value_tag", "interval_ms")
RLF_HEADER = ("time_ms", "ue", "cell", "connected_ms")
ALERT_HEADER = ("time_ms", "ue", "detector", "cell", "score")


def cmd_report(args) -> int:
    path = Path(args.events)
    events = list(eventlog.read(path))
    m = compute_metrics(events)
    start = events[0]
    print("\n".join(summary_lines(start.get("name", "?"), int(start.get("seed", 0)), m)))

    status = EXIT_OK
    sibling = path.with_name("metrics.csv")
    if sibling.exists():
        stored = Metrics.from_csv(sibling.read_text(encoding="utf-8"))
        if stored == m:
            print(f"metrics.csv       matches ({sibling})")
        else:
            print(f"metrics.csv       MISMATCH ({sibling})")
            for name in stored.__dataclass_fields__:
                a, b = getattr(stored, name), getattr(m, name)
                if a != b:
                    print(f"  {name}: stored={a} recomputed={b}")
            status = EXIT_RUNTIME

    tables = (
        ("SI reacquisitions", "reacquisitions.csv", REACQ_HEADER, reacquisition_rows(events)),
        ("Radio link failures", "rlf.csv", RLF_HEADER, rlf_rows(events)),
        ("Detector alerts", "alerts.csv", ALERT_HEADER, alert_rows(events)),
    )
    for title, _, header, rows in tables:
        _table(title, header, rows)

    if args.csv:
        out = Path(args.csv)
        out.mkdir(parents=True, exist_ok=True)
        m.write(out / "metrics.csv")
        for _, fname, header, rows in tables:
            with open(out / fname, "w", newline="", encoding="utf-8") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(header)
                w.writerows(rows)
    return status


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nrsim", description="Rogue 5G NR cell attack simulator.")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a scenario file without running it")
    v.add_argument("file")
    v.set_defaults(fn=cmd_validate)

    r = sub.add_parser("run", help="run one or more scenarios")
    r.add_argument("files", nargs="+", metavar="file")
    r.add_argument("--out", default="out", help="output directory (default: out)")
    r.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    r.add_argument("--jobs", type=int, default=1, help="run scenarios in parallel processes")
    r.set_defaults(fn=cmd_run)

    rep = sub.add_parser("report", help="recompute metrics and tables from an events.log")
    rep.add_argument("events")
    rep.add_argument("--csv", metavar="DIR", help="also write the tables as CSV files")
    rep.set_defaults(fn=cmd_report)
    return p


def main(argv=None) -> int:
    _setup_logging()
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigInvalid as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except LogFormatError as exc:
        print(f"log error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())

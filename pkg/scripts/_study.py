"""Shared plumbing for the replication scripts in this directory."""

import argparse
import csv
import json
import sys
import time

from pairfuse.simulate import StudySpec, run_study, summary_rows


def parser(description, reps=100, seed=20160801):
    ap = argparse.ArgumentParser(description=description)
    ap.add_argument("--reps", type=int, default=reps)
    ap.add_argument("--seed", type=int, default=seed)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--out", default="-", help="CSV path, '-' for stdout")
    return ap


def run_grid(studies, jobs=1):
    """Run ``[(extra_columns, StudySpec), ...]``; return summary rows with the extras prepended."""
    rows = []
    for extra, spec in studies:
        t0 = time.perf_counter()
        summary = run_study(spec, n_jobs=jobs)
        print(f"{extra}: {time.perf_counter() - t0:.1f} s", file=sys.stderr)
        for row in summary_rows(summary):
            rows.append({**extra, **row})
    return rows


def write_rows(path, rows, config):
    fh = sys.stdout if path == "-" else open(path, "w", newline="")
    try:
        fh.write("# config: " + json.dumps(config, sort_keys=True) + "\n")
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: "" if v is None else v for k, v in r.items()})
    finally:
        if fh is not sys.stdout:
            fh.close()


def study(example, args, methods, **kw):
    return StudySpec(example=example, reps=args.reps, seed=args.seed, methods=tuple(methods), **kw)

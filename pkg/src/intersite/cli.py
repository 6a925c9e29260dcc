"""Command line entry point.

Exit codes: 0 success, 1 data error, 2 usage or path error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections import Counter
from pathlib import Path

from . import aggregate, cocluster, ingest, pages, sessions, synth
from .pipeline import expand_inputs

EXIT_OK, EXIT_DATA, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    pass


def _ingest_config(args) -> ingest.IngestConfig:
    suffixes = ingest.DEFAULT_CLEANING_SUFFIXES
    if getattr(args, "suffixes", None) is not None:
        suffixes = tuple(s for s in args.suffixes.split(",") if s)
    return ingest.IngestConfig(
        utc_offset=args.utc_offset,
        input_delimiter=args.delimiter,
        cleaning_suffixes=suffixes,
        strict=args.strict,
    )


def _need_file(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise UsageError(f"no such file: {path}")
    return p


def cmd_ingest(args) -> int:
    files = expand_inputs(args.inputs)
    if not files:
        raise UsageError(f"no input files match {args.inputs}")
    config = _ingest_config(args)
    stats = ingest.IngestStats()
    n = ingest.write_normalized(ingest.ingest(files, config, stats), args.output)
    print(
        f"files={stats.files} lines={stats.lines} malformed={stats.malformed} "
        f"dropped={stats.n_dropped} requests={n}"
    )
    return EXIT_OK


def cmd_sessionize(args) -> int:
    src = _need_file(args.input)
    requests = list(ingest.read_normalized(src))
    config = sessions.SessionizerConfig(window=args.window, cross_shop_only=args.cross_shop_only)
    groups = sessions.group_sessions(requests, config)
    sessions.write_visits(groups, args.output)
    n_sessions = len({r.session_id for r in requests})
    multi = len(sessions.multi_shop_filter(groups))
    reduction = f"{100 * sessions.reduction_ratio(n_sessions, len(groups)):.2f}%" if n_sessions else "n/a"
    print(f"sessions={n_sessions} groups={len(groups)} reduction={reduction} multi_shop={multi}")
    return EXIT_OK


def cmd_stats(args) -> int:
    src = _need_file(args.input)
    visits = list(sessions.read_visits(src))
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    totals = {}
    for kind in aggregate.VISIT_KINDS:
        matrix = aggregate.visit_matrix(visits, kind)
        aggregate.write_table(matrix.to_table(), out / f"{kind}.tsv", corner="Weekday x Hour")
        totals[kind] = matrix.total
    print(f"visits={totals['all_visits']} multi_shop={totals['multi_shop_visits']}")
    return EXIT_OK


def cmd_crosstab(args) -> int:
    src = _need_file(args.input)
    catalog = None
    if args.catalog is not None:
        if not Path(args.catalog).is_dir():
            raise UsageError(f"no such catalog directory: {args.catalog}")
        catalog = pages.load_catalog_dir(args.catalog, delimiter=args.delimiter)
    columns = None
    if args.all_catalog_ids:
        if catalog is None or args.variable not in pages.CATALOG_TABLE_FOR:
            raise UsageError("--all-catalog-ids needs --catalog and an id variable")
        columns = [str(i) for i in sorted(getattr(catalog, pages.CATALOG_TABLE_FOR[args.variable]))]
    skipped: Counter = Counter()
    records = ((r, pages.classify(r.path)) for r in ingest.read_normalized(src))
    table = aggregate.build_crosstab(
        records,
        shop_id=args.shop,
        page_type=args.page_type,
        variable=args.variable,
        catalog=catalog,
        columns=columns,
        skipped=skipped,
    )
    aggregate.write_table(table, args.output, corner="Weekday x Hour")
    rows, cols = table.shape
    print(f"rows={rows} cols={cols} total={table.grand_total} skipped={skipped['missing_variable']}")
    return EXIT_OK


def cmd_cocluster(args) -> int:
    table = aggregate.read_table(_need_file(args.input))
    config = cocluster.FitConfig(
        k=args.k, l=args.l, restarts=args.restarts, max_iters=args.max_iters, seed=args.seed
    )
    model = cocluster.fit(table, config)
    cocluster.write_model(model, args.output)
    if args.report:
        Path(args.report).write_text(cocluster.block_report(model, table).to_text(), encoding="utf-8")
    print(
        f"chi2={model.chi2:.6f} k={model.k} l={model.l} iterations={model.iterations} "
        f"restarts={model.restarts_used} best_restart={model.best_restart}"
    )
    return EXIT_OK


def cmd_report(args) -> int:
    model = cocluster.read_model(_need_file(args.model))
    table = aggregate.read_table(_need_file(args.table)) if args.table else None
    text = cocluster.block_report(model, table, args.row_prefix, args.col_prefix).to_text()
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_synth(args) -> int:
    spec = synth.SynthSpec(
        n_users=args.users,
        shops=args.shops,
        multi_shop_fraction=args.multi_shop_fraction,
        window=args.window,
        days=args.days,
        n_products=args.products,
    )
    result = synth.generate(spec, args.seed)
    synth.write_synth(result, spec, args.output)
    n_sessions = sum(len(sids) for _, sids, _ in result.visits)
    print(
        f"users={spec.n_users} requests={len(result.requests)} sessions={n_sessions} "
        f"multi_shop={result.n_multi_shop}"
    )
    return EXIT_OK


def _add_ingest_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--utc-offset", type=int, default=60, metavar="MINUTES")
    p.add_argument("--delimiter", default=",", metavar="CHAR")
    p.add_argument("--strict", action="store_true", help="abort on the first malformed line")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="intersite", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="merge, normalize and clean raw log files")
    p.add_argument("inputs", nargs="+", help="log files or glob patterns")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--suffixes", help="comma-separated path suffixes to drop")
    _add_ingest_flags(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("sessionize", help="group session ids into cross-shop visits")
    p.add_argument("input", help="normalized request file")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--window", type=float, default=sessions.DEFAULT_WINDOW, metavar="SECONDS")
    p.add_argument("--cross-shop-only", action="store_true", help="ignore referrers on the request's own shop")
    p.set_defaults(func=cmd_sessionize)

    p = sub.add_parser("stats", help="weekday x hour visit matrices")
    p.add_argument("input", help="visits file")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("crosstab", help="time slice x variable contingency table")
    p.add_argument("input", help="normalized request file")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--shop", type=int, default=14)
    p.add_argument("--page-type", default="ls")
    p.add_argument("--variable", default="product_id")
    p.add_argument("--catalog", help="directory with kategorie/list/znacka/tema .csv")
    p.add_argument("--all-catalog-ids", action="store_true", help="keep unobserved catalog ids as zero columns")
    p.add_argument("--delimiter", default=",", metavar="CHAR")
    p.set_defaults(func=cmd_crosstab)

    p = sub.add_parser("cocluster", help="chi-squared crossed clustering of a table file")
    p.add_argument("input", help="table file")
    p.add_argument("-o", "--output", required=True, help="model file")
    p.add_argument("--k", type=int, default=7)
    p.add_argument("--l", type=int, default=5)
    p.add_argument("--restarts", type=int, default=20)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--report", help="also write the block report here")
    p.set_defaults(func=cmd_cocluster)

    p = sub.add_parser("report", help="block report of a model file")
    p.add_argument("model")
    p.add_argument("table", nargs="?", help="source table, for member labels and a consistency check")
    p.add_argument("-o", "--output")
    p.add_argument("--row-prefix", default="Period")
    p.add_argument("--col-prefix", default="Product")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("synth", help="write seeded synthetic logs with ground truth")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--users", type=int, default=1000)
    p.add_argument("--shops", type=int, default=7)
    p.add_argument("--multi-shop-fraction", type=float, default=0.3)
    p.add_argument("--window", type=int, default=sessions.DEFAULT_WINDOW, metavar="SECONDS")
    p.add_argument("--days", type=int, default=24)
    p.add_argument("--products", type=int, default=20)
    p.set_defaults(func=cmd_synth)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"intersite: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ingest.UnreadableFile, FileNotFoundError) as exc:
        print(f"intersite: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (
        ingest.IngestError,
        pages.CatalogError,
        aggregate.AggregateError,
        cocluster.CoclusterError,
        sessions.OutOfOrderInput,
        synth.InvalidSpec,
        ValueError,
    ) as exc:
        print(f"intersite: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())

"""Command-line entry point for the curation pipeline.

One subcommand per pipeline arrow. Exit codes: 0 success, 1 usage error,
2 data error. Diagnostics go to stderr; data goes to files or stdout.
"""

from __future__ import annotations

import argparse
import configparser
import contextlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .cascade import (
    CascadeReport,
    compare_totals,
    read_tabulation_csv,
    run_cascade,
    summarize_statistics,
    tabulate_counts,
    write_tabulation_csv,
)
from .dialect import BUNDLED_WORDLISTS, load_bundled, pairwise_distance_matrix, read_wordlists
from .exceptions import KorpusError
from .formality import FormalityHead, read_embeddings
from .geotag import CityAssigner, CityRegistry
from .ingest import IngestReport, dump_record, ingest_file, parse_tweet_line
from .langid import NgramClassifier, NgramConfig, foreign_mask
from .metrics import compute_metrics, confusion_matrix, stratified_split
from .records import LANGUAGE_CODES, CascadeLabel, normalize_text
from .region import RegionClassifier, class_balance, confusion_by_city, train_region_model

log = logging.getLogger("korpus")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


# -- helpers ----------------------------------------------------------------

@contextlib.contextmanager
def _open_out(path):
    if path in (None, "-"):
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def _read_records(path):
    report = IngestReport()
    records = list(ingest_file(path, report))
    if report.records_rejected:
        log.warning("rejected %d of %d lines: %s", report.records_rejected, report.lines_read,
                    dict(report.rejection_reasons))
    return records


def _read_labeled(path):
    """Records plus their cascade label from a labeled JSONL file."""
    out = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                label = CascadeLabel(json.loads(line)["label"])
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise KorpusError(f"{path}:{lineno}: missing or invalid label ({exc})") from None
            out.append((line, label))
    return out


def _iter_city_labels(path):
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                yield obj.get("city"), CascadeLabel(obj["label"])
            except (json.JSONDecodeError, KeyError, ValueError) as exc:
                raise KorpusError(f"{path}:{lineno}: bad labeled record ({exc})") from None


def _registry(args):
    if getattr(args, "cities", None):
        return CityRegistry.from_csv(args.cities, getattr(args, "radius", None))
    return CityRegistry.bundled(getattr(args, "radius", None))


def _write_json(obj, path=None):
    with _open_out(path) as fh:
        json.dump(obj, fh, indent=2, ensure_ascii=False)
        fh.write("\n")


def _sorted_if_parallel(args, items, key):
    return sorted(items, key=key) if args.jobs > 1 else items


def _ngram_kwargs(args):
    return dict(n_min=args.n_min, n_max=args.n_max, bucket_count=args.buckets,
                embedding_dim=args.dim, epochs=args.epochs, lr=args.lr, seed=args.seed)


# -- subcommands ------------------------------------------------------------

def cmd_ingest(args):
    report = IngestReport()
    with _open_out(args.out) as out:
        for record in ingest_file(args.input, report):
            out.write(dump_record(record) + "\n")
    if args.report:
        _write_json(report.to_dict(), args.report)
    else:
        print(json.dumps(report.to_dict()), file=sys.stderr)
    return EXIT_OK


def cmd_geofence(args):
    records = _read_records(args.input)
    assigner = CityAssigner(_registry(args)).fit()
    geo = [r for r in records if r.geo is not None]
    cities = assigner.transform(np.array([[r.geo.lat, r.geo.lon] for r in geo]).reshape(-1, 2))
    assigned = dict(zip((r.id for r in geo), cities))
    n_assigned = 0
    with _open_out(args.out) as out:
        for r in records:
            city = assigned.get(r.id) if r.geo is not None else None
            n_assigned += city is not None
            out.write(dump_record(r.with_city(city)) + "\n")
    log.info("assigned %d of %d records (%d geotagged)", n_assigned, len(records), len(geo))
    return EXIT_OK


def cmd_train_langid(args):
    texts, labels = [], []
    with open(args.input, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                text, label = obj["text"], obj["label"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise KorpusError(f"{args.input}:{lineno}: need text and label ({exc})") from None
            if label not in LANGUAGE_CODES:
                raise KorpusError(f"{args.input}:{lineno}: unknown language code {label!r}")
            texts.append(normalize_text(text))
            labels.append(label)
    model = NgramClassifier(**_ngram_kwargs(args)).fit(texts, labels)
    model.save(args.model)
    log.info("trained on %d texts, labels %s, final loss %.4f", len(texts),
             list(model.classes_), model.loss_curve_[-1] if model.loss_curve_ else float("nan"))
    return EXIT_OK


def cmd_filter_foreign(args):
    model = NgramClassifier.load(args.model)
    records = _read_records(args.input)
    mask = foreign_mask(model, [r.text_norm for r in records], args.threshold)
    with _open_out(args.out) as out:
        for r, foreign in zip(records, mask):
            if not foreign:
                out.write(dump_record(r) + "\n")
    if args.foreign_out:
        with _open_out(args.foreign_out) as out:
            for r, foreign in zip(records, mask):
                if foreign:
                    out.write(dump_record(r) + "\n")
    log.info("%d of %d records foreign", int(mask.sum()), len(records))
    return EXIT_OK


def cmd_train_formality(args):
    data = read_embeddings(args.embeddings).labeled().check_dim(args.input_dim)
    head = FormalityHead(input_dim=args.input_dim, hidden_dim=args.hidden_dim,
                         dropout_rate=args.dropout, epochs=args.epochs,
                         batch_size=args.batch_size, lr=args.lr, seed=args.seed)
    idx = list(range(len(data)))
    if args.no_split:
        train, test, val = idx, [], []
    else:
        train, test, val = stratified_split(idx, data.labels, args.fractions, args.seed)
    head.fit(data.vectors[train], [data.labels[i] for i in train])
    head.save(args.model)
    report = {"train_size": len(train), "test_size": len(test), "validation_size": len(val),
              "loss_curve": head.loss_curve_}
    for name, part in (("test", test), ("validation", val)):
        if part:
            preds = head.predict(data.vectors[part])
            cm = confusion_matrix(zip([data.labels[i] for i in part], preds), ["Formal", "Informal"])
            report[name] = compute_metrics(cm).to_dict()
    if args.report:
        _write_json(report, args.report)
    else:
        log.info("test metrics: %s", json.dumps(report.get("test", {})))
    return EXIT_OK


def _cascade_outputs(args, labeled, quarantine):
    labeled = _sorted_if_parallel(args, list(labeled), key=lambda p: p[0].id)
    return labeled, _sorted_if_parallel(args, quarantine, key=lambda r: r.id)


def cmd_filter_formal(args):
    head = FormalityHead.load(args.head)
    source = read_embeddings(args.embeddings).as_mapping()
    quarantine, report = [], CascadeReport()
    labeled = run_cascade(_read_records(args.input), None, head, source, n_jobs=args.jobs,
                          quarantine=quarantine, report=report)
    labeled, quarantine = _cascade_outputs(args, labeled, quarantine)
    with _open_out(args.out) as out:
        for r, lab in labeled:
            if lab is CascadeLabel.INFORMAL:
                out.write(dump_record(r) + "\n")
    if args.formal_out:
        with _open_out(args.formal_out) as out:
            for r, lab in labeled:
                if lab is CascadeLabel.FORMAL:
                    out.write(dump_record(r) + "\n")
    _write_quarantine(args, quarantine)
    log.info("%s", json.dumps(report.to_dict()))
    return EXIT_OK


def _write_quarantine(args, quarantine):
    if args.quarantine:
        with _open_out(args.quarantine) as out:
            for r in quarantine:
                out.write(dump_record(r) + "\n")


def cmd_train_region(args):
    labeled = [(parse_tweet_line(line), label) for line, label in _read_labeled(args.input)]
    cfg = NgramConfig(args.n_min, args.n_max, args.buckets, args.dim)
    model = train_region_model(labeled, cfg, args.epochs, args.lr, args.seed,
                               class_weight=args.class_weight, registry=_registry(args))
    model.save(args.model)
    log.info("class balance: %s", json.dumps(class_balance(r.city for r, _ in labeled)))
    return EXIT_OK


def cmd_classify_region(args):
    model = RegionClassifier.load(args.model)
    records = _read_records(args.input)
    proba = model.predict_proba([r.text_norm for r in records])
    with _open_out(args.out) as out:
        for r, p in zip(records, proba):
            best = int(np.argmax(p))
            out.write(json.dumps({"id": r.id, "city": r.city, "predicted": str(model.classes_[best]),
                                  "probability": float(p[best])}, ensure_ascii=False) + "\n")
    if args.report:
        evaluated = [r for r in records if r.city is not None]
        cm = confusion_by_city(model, evaluated)
        rep = {"confusion": cm.to_dict(), "class_balance": class_balance(r.city for r in evaluated)}
        if cm.total:
            rep["metrics"] = compute_metrics(cm).to_dict()
        _write_json(rep, args.report)
    return EXIT_OK


def cmd_cascade(args):
    langid = NgramClassifier.load(args.langid)
    head = FormalityHead.load(args.head)
    source = read_embeddings(args.embeddings).as_mapping()
    quarantine, report = [], CascadeReport()
    labeled = run_cascade(_read_records(args.input), langid, head, source,
                          threshold=args.threshold, n_jobs=args.jobs,
                          quarantine=quarantine, report=report)
    labeled, quarantine = _cascade_outputs(args, labeled, quarantine)
    with _open_out(args.out) as out:
        for r, lab in labeled:
            out.write(dump_record(r, label=lab.value) + "\n")
    _write_quarantine(args, quarantine)
    if args.report:
        _write_json(report.to_dict(), args.report)
    else:
        print(json.dumps(report.to_dict()), file=sys.stderr)
    return EXIT_OK


def cmd_tabulate(args):
    if str(args.input).endswith(".csv"):
        rows = read_tabulation_csv(args.input)
    else:
        rows = tabulate_counts(_iter_city_labels(args.input), _registry(args))
    with _open_out(args.out) as out:
        write_tabulation_csv(rows, out, with_total=not args.no_total)
    return EXIT_OK


def cmd_stats(args):
    if str(args.input).endswith(".csv"):
        rows = read_tabulation_csv(args.input)
    else:
        rows = tabulate_counts(_iter_city_labels(args.input), CityRegistry([]))
    stats = summarize_statistics(rows).to_dict()
    if args.compare:
        diffs = compare_totals(rows)
        for col, (summed, reported) in diffs.items():
            log.warning("%s: summed %d, reported %d (diff %+d)", col, summed, reported, summed - reported)
        stats["discrepancies"] = {k: {"summed": a, "reported": b} for k, (a, b) in diffs.items()}
    _write_json(stats, args.out)
    return EXIT_OK


def cmd_dialect_dist(args):
    if args.bundled:
        lists = load_bundled(args.bundled)
    elif args.input:
        lists = read_wordlists(args.input)
    else:
        raise UsageError("dialect-dist: one of --input or --bundled is required")
    matrix = pairwise_distance_matrix(lists)
    with _open_out(args.out) as out:
        matrix.to_csv(out)
    return EXIT_OK


def cmd_eval(args):
    pairs = []
    with open(args.input, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                pairs.append((str(obj["true"]), str(obj["pred"])))
            except (json.JSONDecodeError, KeyError) as exc:
                raise KorpusError(f"{args.input}:{lineno}: need true and pred ({exc})") from None
    labels = args.labels.split(",") if args.labels else sorted({x for p in pairs for x in p})
    metrics = compute_metrics(confusion_matrix(pairs, labels))
    with _open_out(args.out) as out:
        if args.format == "table":
            out.write(metrics.render_table() + "\n")
        else:
            json.dump(metrics.to_dict(), out, indent=2)
            out.write("\n")
    return EXIT_OK


# -- parser -----------------------------------------------------------------

def _fractions(text):
    try:
        parts = tuple(float(x) for x in text.split(","))
    except ValueError:
        raise argparse.ArgumentTypeError(f"bad fractions {text!r}") from None
    if len(parts) != 3:
        raise argparse.ArgumentTypeError("expected three comma-separated fractions")
    return parts


def _add_ngram_options(p, epochs=5):
    p.add_argument("--n-min", type=int, default=2)
    p.add_argument("--n-max", type=int, default=5)
    p.add_argument("--buckets", type=int, default=2**18, help="hash buckets (power of two)")
    p.add_argument("--dim", type=int, default=16, help="embedding dimension")
    p.add_argument("--epochs", type=int, default=epochs)
    p.add_argument("--lr", type=float, default=0.5)


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--config", help="flat 'key = value' file; flags override it")
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--jobs", type=int, default=1,
                        help="worker threads for record-parallel stages (output sorted by id when > 1)")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = _Parser(prog="korpus",
                     description="Curate low-resource Indonesian text from geotagged posts.",
                     epilog="Run 'korpus COMMAND --help' for per-command options.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)

    def add(name, func, help):
        p = sub.add_parser(name, help=help, description=help, parents=[common])
        p.set_defaults(func=func)
        return p

    p = add("ingest", cmd_ingest, "validate raw JSONL and emit canonical records")
    p.add_argument("--input", required=True)
    p.add_argument("--out")
    p.add_argument("--report", help="sidecar JSON for the ingest report (default: stderr)")

    p = add("geofence", cmd_geofence, "assign geotagged records to the nearest city")
    p.add_argument("--input", required=True)
    p.add_argument("--out")
    p.add_argument("--cities", help="CSV name,lat,lon[,radius_km] (default: bundled 33 capitals)")
    p.add_argument("--radius", type=float, help="override every fence radius, km")

    p = add("train-langid", cmd_train_langid, "train the n-gram language identifier")
    p.add_argument("--input", required=True, help="JSONL with text and label (ISO 639-3)")
    p.add_argument("--model", required=True)
    _add_ngram_options(p)

    p = add("filter-foreign", cmd_filter_foreign, "drop English/Japanese/Korean/Arabic records")
    p.add_argument("--input", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out")
    p.add_argument("--foreign-out")

    p = add("train-formality", cmd_train_formality, "train the formal/informal MLP head")
    p.add_argument("--embeddings", required=True, help="labeled embeddings (KORPUS-EMB or JSONL)")
    p.add_argument("--model", required=True)
    p.add_argument("--report", help="JSON with loss curve and split metrics")
    p.add_argument("--input-dim", type=int, default=768)
    p.add_argument("--hidden-dim", type=int, default=512)
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--epochs", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--lr", type=float, default=0.05)
    p.add_argument("--fractions", type=_fractions, default=(0.70, 0.15, 0.15),
                   help="train,test,validation")
    p.add_argument("--no-split", action="store_true", help="train on every labeled vector")

    p = add("filter-formal", cmd_filter_formal, "drop formal Indonesian records")
    p.add_argument("--input", required=True)
    p.add_argument("--head", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--out")
    p.add_argument("--formal-out")
    p.add_argument("--quarantine", help="records lacking an embedding")

    p = add("train-region", cmd_train_region, "train the region classifier on informal records")
    p.add_argument("--input", required=True, help="labeled JSONL with city set")
    p.add_argument("--model", required=True)
    p.add_argument("--cities")
    p.add_argument("--class-weight", choices=["balanced"], default=None)
    _add_ngram_options(p)

    p = add("classify-region", cmd_classify_region, "predict the origin city of records")
    p.add_argument("--input", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--out")
    p.add_argument("--report", help="confusion matrix JSON over records with a city")

    p = add("cascade", cmd_cascade, "run foreign -> formal -> informal labeling")
    p.add_argument("--input", required=True)
    p.add_argument("--langid", required=True)
    p.add_argument("--head", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out")
    p.add_argument("--quarantine")
    p.add_argument("--report", help="category counts JSON (default: stderr)")

    p = add("tabulate", cmd_tabulate, "per-city counts from labeled records")
    p.add_argument("--input", required=True, help="labeled JSONL (or a tabulation CSV)")
    p.add_argument("--out")
    p.add_argument("--cities")
    p.add_argument("--no-total", action="store_true")

    p = add("stats", cmd_stats, "corpus percentages from a tabulation")
    p.add_argument("--input", required=True, help="tabulation CSV or labeled JSONL")
    p.add_argument("--out")
    p.add_argument("--compare", action="store_true", help="report differences from the printed totals")

    p = add("dialect-dist", cmd_dialect_dist, "pairwise lexical distance between wordlists")
    p.add_argument("--input")
    p.add_argument("--bundled", choices=BUNDLED_WORDLISTS)
    p.add_argument("--out")

    p = add("eval", cmd_eval, "precision/recall/F1 from true/pred pairs")
    p.add_argument("--input", required=True, help="JSONL with true and pred")
    p.add_argument("--labels", help="comma-separated label order")
    p.add_argument("--format", choices=["json", "table"], default="json")
    p.add_argument("--out")
    return parser


def load_config(path) -> dict[str, str]:
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    cp.optionxform = str
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    try:
        cp.read_string("[run]\n" + text)
    except configparser.Error as exc:
        raise UsageError(f"bad config {path}: {exc}") from None
    return {k.strip().replace("-", "_"): v.strip() for k, v in cp["run"].items()}


def _apply_config(parser, argv, config_path):
    sub = parser._subparsers._group_actions[0] if parser._subparsers else None
    values = load_config(config_path)
    targets = [parser]
    if sub is not None:
        for name in argv:
            if name in sub.choices:
                targets.append(sub.choices[name])
                break
    for target in targets:
        known = {}
        for action in target._actions:
            if action.dest in values:
                v = values[action.dest]
                if action.nargs == 0:
                    v = v.lower() in ("1", "true", "yes", "on")
                known[action.dest] = v
        target.set_defaults(**known)


def run_command(argv: list[str]) -> int:
    parser = build_parser()
    try:
        pre, _ = build_parser().parse_known_args(argv)
        if getattr(pre, "config", None):
            _apply_config(parser, argv, pre.config)
        args = parser.parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return EXIT_OK if exc.code in (0, None) else EXIT_USAGE
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr, force=True)
    if args.jobs < 1:
        print("korpus: error: --jobs must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except (KorpusError, OSError, ValueError) as exc:
        print(f"korpus {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_DATA


def main(argv=None) -> int:
    return run_command(sys.argv[1:] if argv is None else list(argv))


if __name__ == "__main__":
    sys.exit(main())

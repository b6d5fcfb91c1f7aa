"""Command-line entry point: ``saasbroker {select,negotiate,curves,monitor,serve}``."""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import datasets
from .errors import BrokerError
from .monitoring import MetricMapping, SampleStore, evaluate_compliance, map_metrics
from .negotiation import utility_cost, utility_gain
from .qos import QosAttributeSpec, read_offers, select_best, topsis_rank
from .scenario import run_scenario
from .sla import Sla, SlaRequestDoc, parse_sla_request_xml, to_requirement


class CliError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _weights(text: str) -> dict[str, float]:
    out = {}
    for part in text.split(","):
        name, sep, value = part.partition("=")
        if not sep:
            raise argparse.ArgumentTypeError(f"expected NAME=WEIGHT pairs, got {part!r}")
        out[name.strip()] = float(value)
    return out


def _existing(path: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise CliError(f"no such file: {p}")
    return p


def read_request(path: Path) -> SlaRequestDoc:
    data = path.read_bytes()
    if path.suffix.lower() == ".xml" or data.lstrip().startswith(b"<"):
        return parse_sla_request_xml(data)
    return SlaRequestDoc.from_dict(json.loads(data))


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv(rows: list[list], header: list[str]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# -- select ---------------------------------------------------------------------------

def cmd_select(args) -> int:
    if args.case_study:
        offers, doc = datasets.case_study_offers(), datasets.case_study_request()
    else:
        if not args.offers or not args.request:
            raise CliError("select needs --offers and --request (or --case-study)")
        try:
            offers = read_offers(_existing(args.offers))
        except ValueError as exc:
            raise CliError(str(exc)) from None
        doc = read_request(_existing(args.request))
    requirement, specs = to_requirement(doc)
    if args.weights:
        w = args.weights
        missing = [s.name for s in specs if s.name not in w]
        if missing:
            raise CliError(f"--weights lacks {missing}")
        specs = [QosAttributeSpec(s.name, s.direction, s.unit, w[s.name]) for s in specs]

    tables = [select_best(offers, requirement, specs)]
    if args.topsis:
        tables.append(topsis_rank(offers, requirement, specs, normalization=args.topsis_normalization))
    flags = tables[0].matrix.satisfaction() if args.report else None

    if args.format == "json":
        body = {"rankings": [t.to_dict(percent=True) for t in tables]}
        if flags is not None:
            body["satisfaction"] = flags
        text = json.dumps(body, indent=2) + "\n"
    elif args.format == "csv":
        header = ["method", "rank", "provider_id", "score_percent"]
        rows = [[t.method.value, e.rank, e.provider_id, f"{100 * e.score:.2f}"] for t in tables for e in t.entries]
        if flags is not None:
            header += [f"meets_{s.name}" for s in specs]
            rows = [r + [int(flags[r[2]][s.name]) for s in specs] for r in rows]
        text = _csv(rows, header)
    else:
        lines = []
        for t in tables:
            lines.append(f"{t.method.value}")
            head = f"{'rank':>4}  {'provider':>8}  {'score %':>8}"
            if flags is not None:
                head += "  meets: " + " ".join(s.name for s in specs)
            lines.append(head)
            for e in t.entries:
                line = f"{e.rank:>4}  {e.provider_id:>8}  {100 * e.score:>8.2f}"
                if flags is not None:
                    line += "  " + " ".join("yes" if flags[e.provider_id][s.name] else "no" for s in specs)
                lines.append(line)
            lines.append("")
        text = "\n".join(lines)
    _emit(text, args.out)
    return 0


# -- negotiate -------------------------------------------------------------------------

def cmd_negotiate(args) -> int:
    if args.case_study:
        scenario = datasets.negotiation_scenario()
    elif args.scenario:
        scenario = json.loads(_existing(args.scenario).read_text())
    else:
        raise CliError("negotiate needs a scenario file (or --case-study)")
    overrides = {"threshold": args.threshold, "max_rounds": args.max_rounds, "delta": args.delta, "gamma": args.gamma}
    session_id = scenario.get("session_id") or f"seed-{args.seed}"
    result = run_scenario(scenario, overrides, session_id=session_id)
    doc = result.to_dict()

    if args.format == "json":
        text = json.dumps(doc, indent=2) + "\n"
    elif args.format == "csv":
        names = list(result.session.params)
        rows = [[m["round"], m["sender"], m["kind"]]
                + [("" if m["terms"] is None else f"{m['terms'][n]:.4f}") for n in names]
                + ["" if m["utility"] is None else f"{m['utility']:.5f}"]
                for m in doc["transcript"]]
        text = _csv(rows, ["round", "sender", "kind", *names, "utility"])
    else:
        lines = []
        for m in doc["transcript"]:
            terms = "" if m["terms"] is None else " ".join(f"{k}={v:.4f}" for k, v in m["terms"].items())
            u = "" if m["utility"] is None else f"U={m['utility']:.5f}"
            lines.append(f"round {m['round']:>2}  {m['sender']:<8} {m['kind']:<16} {terms}  {u}".rstrip())
        lines.append(f"outcome: {doc['outcome']} after {doc['round']} round(s)")
        if doc["final_terms"]:
            lines.append("agreed terms: " + " ".join(f"{k}={v:.4f}" for k, v in doc["final_terms"].items()))
        text = "\n".join(lines) + "\n"
    _emit(text, args.out)
    return 0


# -- curves ----------------------------------------------------------------------------

def cmd_curves(args) -> int:
    if args.grid < 2:
        raise CliError("--grid must be at least 2")
    xs = np.linspace(0.0, 1.0, args.grid)
    if args.kind in ("gain", "cost"):
        fn = utility_gain if args.kind == "gain" else utility_cost
        betas = args.betas or [1.0, 2.0, 4.0]
        alpha = args.alpha if args.alpha is not None else (0.99 if args.kind == "gain" else 0.20)
        var = "x" if args.kind == "gain" else "y"
        label = "F" if args.kind == "gain" else "G"
        header = [var] + [f"{label}_beta={b:g}" for b in betas]
        rows = [[f"{x:.6g}"] + [f"{fn(float(x), alpha, b):.8f}" for b in betas] for x in xs]
    else:
        weights = args.weights_pair or [0.7, 0.3]
        alphas = args.alphas or [0.99, 0.20]
        betas = args.betas or [4.0, 2.0]
        if len(weights) != 2 or len(alphas) != 2 or len(betas) != 2:
            raise CliError("surface needs two weights, two alphas and two betas")
        header = ["x", "y", "U"]
        rows = []
        for x in xs:
            fx = utility_gain(float(x), alphas[0], betas[0])
            for y in xs:
                u = weights[0] * fx + weights[1] * utility_cost(float(y), alphas[1], betas[1])
                rows.append([f"{x:.6g}", f"{y:.6g}", f"{u:.8f}"])
    _emit(_csv(rows, header), args.out)
    return 0


# -- monitor ---------------------------------------------------------------------------

def cmd_monitor(args) -> int:
    sla = Sla.from_dict(json.loads(_existing(args.sla).read_text()))
    store = SampleStore()
    report = store.ingest(_existing(args.feed).read_text().splitlines())
    for err in report.errors:
        logging.warning("%s: %s", args.feed, err)
    if args.mapping:
        mapping = MetricMapping.from_dict(json.loads(_existing(args.mapping).read_text()))
    else:
        mapping = MetricMapping.identity_for(sla)
    samples = store.samples()
    start = args.start if args.start is not None else (samples[0].timestamp if samples else 0)
    end = args.end if args.end is not None else (samples[-1].timestamp + 1 if samples else start + 1)
    result = evaluate_compliance(sla, map_metrics(mapping, samples), (start, end))
    doc = result.to_dict()
    if args.format == "json":
        text = json.dumps(doc, indent=2) + "\n"
    elif args.format == "csv":
        rows = [[r["slo_index"], r["slo"]["indicator"], r["slo"]["comparator"], r["slo"]["target"],
                 r["slo"]["percentile"], r["sample_count"],
                 "" if r["achieved_fraction"] is None else f"{r['achieved_fraction']:.4f}", r["status"]]
                for r in doc["results"]]
        text = _csv(rows, ["slo", "indicator", "comparator", "target", "percentile", "samples", "achieved", "status"])
    else:
        lines = [f"SLA {doc['sla_id']}  window [{start}, {end})"]
        for r in doc["results"]:
            s = r["slo"]
            ach = "n/a" if r["achieved_fraction"] is None else f"{100 * r['achieved_fraction']:.2f}%"
            lines.append(f"  {s['indicator']} {s['comparator']} {s['target']:g} @ {s['percentile']:g}%: "
                         f"{ach} of {r['sample_count']} samples -> {r['status']}")
        for v in doc["violations"]:
            lines.append(f"  VIOLATION {v['indicator']}: shortfall {v['shortfall']:.4f}")
        text = "\n".join(lines) + "\n"
    _emit(text, args.out)
    return 0


# -- serve -----------------------------------------------------------------------------

def cmd_serve(args) -> int:
    from .broker import BrokerConfig, BrokerService, make_server

    config = BrokerConfig.load(args.config)
    service = BrokerService(args.data_dir, config)
    server = make_server(service, args.host, args.port)
    host, port = server.server_address[:2]
    logging.info("broker listening on http://%s:%s (data in %s)", host, port, service.store.data_dir)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="saasbroker", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, formats=("table", "csv", "json")):
        p.add_argument("--format", choices=formats, default=formats[0])
        p.add_argument("--out", help="write output to this file instead of stdout")
        p.add_argument("--seed", type=int, default=0, help="fixes any generated identifiers")

    p = sub.add_parser("select", help="rank provider offers for a request")
    p.add_argument("--offers", help="offers CSV (provider_id,<attr>,...) or JSON")
    p.add_argument("--request", help="request document, XML or JSON")
    p.add_argument("--case-study", action="store_true", help="use the bundled 24-provider case study")
    p.add_argument("--weights", type=_weights, help="override weights, e.g. Availability=0.3,Cost=0.7")
    p.add_argument("--topsis", action="store_true", help="also rank with TOPSIS")
    p.add_argument("--topsis-normalization", choices=("minmax", "vector"), default="minmax")
    p.add_argument("--report", action="store_true", help="add per-attribute 'meets requirement' flags")
    common(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("negotiate", help="run a negotiation scenario")
    p.add_argument("scenario", nargs="?", help="scenario JSON")
    p.add_argument("--case-study", action="store_true", help="use the bundled two-attribute scenario")
    p.add_argument("--threshold", type=float)
    p.add_argument("--max-rounds", type=int)
    p.add_argument("--delta", type=float, help="broker concession step per round")
    p.add_argument("--gamma", type=float, help="provider concession step per round")
    common(p)
    p.set_defaults(func=cmd_negotiate)

    p = sub.add_parser("curves", help="utility-function curves as CSV")
    p.add_argument("--kind", choices=("gain", "cost", "surface"), default="gain")
    p.add_argument("--grid", type=int, default=101)
    p.add_argument("--alpha", type=float)
    p.add_argument("--betas", type=_floats)
    p.add_argument("--alphas", type=_floats, help="surface: alpha for the utility- and cost-driven attribute")
    p.add_argument("--weights", dest="weights_pair", type=_floats, help="surface: two weights")
    common(p, formats=("csv",))
    p.set_defaults(func=cmd_curves)

    p = sub.add_parser("monitor", help="evaluate SLA compliance from a metric feed")
    p.add_argument("--sla", required=True, help="SLA JSON")
    p.add_argument("--feed", required=True, help="JSON-lines metric samples")
    p.add_argument("--mapping", help="metric mapping JSON (default: metric name = indicator)")
    p.add_argument("--start", type=int, help="window start, epoch ms")
    p.add_argument("--end", type=int, help="window end (exclusive), epoch ms")
    common(p)
    p.set_defaults(func=cmd_monitor)

    p = sub.add_parser("serve", help="run the broker HTTP API")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8080)
    p.add_argument("--data-dir", help="defaults to $SAASBROKER_DATA_DIR")
    p.add_argument("--config", help="JSON config; defaults to $SAASBROKER_CONFIG")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose or args.command == "serve" else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (CliError, BrokerError, OSError, ValueError, KeyError) as exc:
        print(f"saasbroker {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

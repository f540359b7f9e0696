"""Command-line front end.

Subcommands::

    qtlnet simulate  --out DIR [--signal strong|weak | --model truth.json --map map.csv] [--n 500] [--seed S]
    qtlnet scan      --cross cross.csv --trait Y5 [--given Y2,Y3,Y4] --out DIR
    qtlnet qtlnet    --cross cross.csv --out DIR [--iterations 30000 --thin 10 --burnin 300 --chains 1]
    qtlnet summarize --posterior DIR/posterior.json --out DIR [--rule max|threshold --tau 0.5]

Exit status is 0 on success, 2 for invalid input and 3 for numerical
degeneracy that prevents the analysis.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .estimators import QTLnet
from .exceptions import DegenerateInputError, QTLnetError
from .genetics import F2Cross, GeneticMap, calc_genoprob, format_locus
from .hcgr import HcgrModel
from .mapping import scan, select_architecture
from .mcmc import EdgePosterior, averaged_network, dump_posterior, posterior_document
from .simulation import benchmark_map, benchmark_model, simulate_cross

logger = logging.getLogger("qtlnet")

EXIT_OK, EXIT_INPUT, EXIT_DEGENERATE = 0, 2, 3


def _timestamp() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _outdir(path) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _load(args):
    gmap = GeneticMap.read_csv(args.map) if args.map else None
    cross = F2Cross.read_csv(args.cross, gmap)
    return cross, calc_genoprob(cross, args.step, args.error_rate)


def _trait_index(label: str, names) -> int:
    label = label.strip()
    if label in names:
        return list(names).index(label)
    if label.isdigit() and 1 <= int(label) <= len(names):
        return int(label) - 1
    raise QTLnetError(f"unknown trait {label!r}; known: {', '.join(names)}")


def cmd_simulate(args) -> int:
    out = _outdir(args.out)
    if args.model:
        with open(args.model) as fh:
            model = HcgrModel.from_dict(json.load(fh))
        gmap = GeneticMap.read_csv(args.map) if args.map else benchmark_map()
    else:
        gmap = benchmark_map()
        model = benchmark_model(args.signal, args.seed, gmap)
    cross = simulate_cross(model, gmap, args.n, args.seed)
    cross.write_csv(out / "cross.csv")
    gmap.write_csv(out / "map.csv")
    with open(out / "truth.json", "w") as fh:
        json.dump(model.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    logger.info("wrote %d individuals x %d traits to %s", cross.n_individuals, cross.n_traits, out)
    return EXIT_OK


def cmd_scan(args) -> int:
    cross, probs = _load(args)
    names = cross.trait_names
    trait = _trait_index(args.trait, names)
    given = [_trait_index(g, names) for g in args.given.split(",") if g.strip()] if args.given else []
    result = scan(trait, given, cross, probs)
    arch = select_architecture(result, args.threshold)
    out = _outdir(args.out)
    stem = names[trait] + ("_given_" + "_".join(names[g] for g in sorted(given)) if given else "")
    result.to_csv(out / f"scan_{stem}.csv")
    for q in arch.qtls:
        lo, hi = q.interval
        print(f"{names[trait]}\t{format_locus(q.chromosome, q.position)}\tLOD={q.lod:.2f}\t"
              f"interval=[{lo:g}, {hi:g}]")
    if not arch.qtls:
        print(f"{names[trait]}\tno QTL above {args.threshold:g}")
    return EXIT_OK


def cmd_qtlnet(args) -> int:
    cross, probs = _load(args)
    est = QTLnet(args.threshold, args.iterations, args.thin, args.burnin, args.chains,
                 random_state=args.seed)
    est.fit(cross.phenotypes, probs, cross.trait_names)
    names = est.trait_names_
    ep = est.edge_posterior_
    settings = {
        "iterations": args.iterations, "thinning": args.thin, "burnin": args.burnin,
        "chains": args.chains, "seed": args.seed, "chain_seeds": est.chain_seeds_,
        "threshold": args.threshold, "step": args.step, "error_rate": args.error_rate,
        "version": __version__,
    }
    doc = posterior_document(ep, est.sample_, settings)
    best = est.best_structure()
    doc["architectures"] = {
        names[a.trait]: [{"chromosome": q.chromosome, "position": q.position, "lod": q.lod}
                         for q in a.qtls]
        for a in est.architectures(best)
    }
    if not args.reproducible:
        doc["created"] = _timestamp()
    out = _outdir(args.out)
    dump_posterior(doc, out / "posterior.json")
    with open(out / "trace.csv", "w", newline="") as fh:
        if not args.reproducible:
            fh.write(f"# created {doc['created']}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["chain", "iteration", "score", "accepted"])
        for c, s in enumerate(est.chains_, start=1):
            for k, (score, acc) in enumerate(zip(s.trace_scores, s.trace_accepted), start=1):
                w.writerow([c, k, f"{score:.10g}", int(acc)])
    logger.info("%d stored structures, acceptance %.3f", len(est.sample_), est.acceptance_rate_)
    return EXIT_OK


def cmd_summarize(args) -> int:
    with open(args.posterior) as fh:
        doc = json.load(fh)
    try:
        ep = EdgePosterior.from_dict(doc)
    except (KeyError, TypeError, ValueError) as exc:
        raise QTLnetError(f"{args.posterior}: malformed posterior ({exc})") from None
    net = averaged_network(ep, args.rule, args.tau)
    names = ep.names()
    labels = {}
    for trait, qtls in doc.get("architectures", {}).items():
        if trait in names:
            labels[names.index(trait)] = [format_locus(q["chromosome"], q["position"]) for q in qtls]
    out = _outdir(args.out)
    (out / "network.dot").write_text(net.to_dot(labels))
    ep.to_csv(out / "pairs.csv")
    if net.cyclic:
        logger.warning("averaged network contains a cycle")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qtlnet", description="Causal phenotype networks with QTL mapping.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def data_opts(sp):
        sp.add_argument("--cross", required=True, help="cross CSV")
        sp.add_argument("--map", help="map CSV (overrides positions in the cross preamble)")
        sp.add_argument("--step", type=float, default=2.0, help="pseudomarker step in cM")
        sp.add_argument("--error-rate", type=float, default=1e-4)
        sp.add_argument("--threshold", type=float, default=5.0, help="LOD threshold")

    sp = sub.add_parser("simulate", help="simulate an F2 cross")
    sp.add_argument("--signal", choices=("strong", "weak"), default="strong")
    sp.add_argument("--model", help="truth JSON to simulate from instead of a preset")
    sp.add_argument("--map", help="map CSV used with --model")
    sp.add_argument("--n", type=int, default=500)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("scan", help="conditional genome scan of one trait")
    data_opts(sp)
    sp.add_argument("--trait", required=True, help="trait name or 1-based index")
    sp.add_argument("--given", help="comma-separated conditioning traits")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_scan)

    sp = sub.add_parser("qtlnet", help="sample network structures")
    data_opts(sp)
    sp.add_argument("--iterations", type=int, default=30000)
    sp.add_argument("--thin", type=int, default=10)
    sp.add_argument("--burnin", type=int, default=300, help="stored structures to discard")
    sp.add_argument("--chains", type=int, default=1)
    sp.add_argument("--seed", type=int)
    sp.add_argument("--reproducible", action="store_true", help="omit timestamps")
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_qtlnet)

    sp = sub.add_parser("summarize", help="averaged network and pairwise posteriors")
    sp.add_argument("--posterior", required=True)
    sp.add_argument("--rule", choices=("max", "threshold"), default="max")
    sp.add_argument("--tau", type=float)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_summarize)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except DegenerateInputError as exc:
        print(f"qtlnet: degenerate input: {exc}", file=sys.stderr)
        return EXIT_DEGENERATE
    except (QTLnetError, OSError, json.JSONDecodeError) as exc:
        print(f"qtlnet: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

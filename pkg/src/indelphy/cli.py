"""Command-line entry point for the indelphy subcommands."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .estimator import VARIANTS, EstimatorConfig, distance_matrix
from .experiment import ExperimentConfig, model_from_name, run_experiment
from .io import (read_config, read_matrix, read_sequences, write_ancestry, write_matrix, write_sequences)
from .model import BINARY, EdgeParams, SubstitutionModel
from .simulator import evolve_tree
from .topology import Topology, reconstruct_topology, robinson_foulds
from .tree import parse_newick
from .validation import SCALES, validate_analytics


def _config_defaults(path: str | None) -> dict:
    return read_config(path) if path else {}


def cmd_simulate(args) -> int:
    cfg = _config_defaults(args.config)
    get = lambda key, default: getattr(args, key) if getattr(args, key) is not None else cfg.get(key, default)  # noqa: E731
    rates = EdgeParams(0.0, float(get("eta", 0.0)), float(get("delta", 0.0)), float(get("lam", 0.0)))
    tree = parse_newick(Path(args.tree).read_text().strip(), rates=rates)
    model = model_from_name(get("model", "cfn"))
    seqs = evolve_tree(tree, int(float(get("k_r", 1000))), model, int(get("seed", 0)),
                       track_ancestry=args.ancestry is not None)
    nodes = range(tree.n_nodes) if args.internal else tree.leaves()
    named = {}
    for v in nodes:
        named[tree.names[v] or f"node{v}"] = seqs[v]
    write_sequences(args.out, named, model)
    if args.ancestry:
        write_ancestry(args.ancestry, {k: s.labels for k, s in named.items()})
    return 0


def cmd_estimate(args) -> int:
    cfg = _config_defaults(args.config)
    get = lambda key, default: getattr(args, key) if getattr(args, key) is not None else cfg.get(key, default)  # noqa: E731
    texts, alphabet = read_sequences(args.seqs)
    model_name = get("model", None) or ("cfn" if alphabet == BINARY else "jc")
    model = model_from_name(model_name)
    if set(alphabet) != set(model.alphabet):
        raise SystemExit(f"sequence alphabet {alphabet} does not match model {model_name}")
    k0 = get("k0", None)
    est = EstimatorConfig(None if k0 in (None, "none") else int(float(k0)), float(get("zeta", 0.6)),
                          get("variant", "clock"), float(get("eps_log", 1e-12)), float(get("delta_u_c", 3.0)))
    seqs = {k: model.encode(v) for k, v in texts.items()}
    D = distance_matrix(seqs, est, model)
    D.meta["model"] = model_name
    write_matrix(args.out, D)
    return 0


def cmd_reconstruct(args) -> int:
    D = read_matrix(args.matrix)
    topo = reconstruct_topology(D, args.method)
    text = topo.to_newick() + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.truth:
        truth = Topology.from_newick(Path(args.truth).read_text().strip())
        rf = robinson_foulds(topo, truth)
        print(f"robinson_foulds\t{rf}", file=sys.stderr)
        return 0 if rf == 0 else 1
    return 0


def cmd_validate(args) -> int:
    report = validate_analytics(args.seed, args.scale, args.z_max)
    sys.stdout.write(report.to_text())
    if args.out:
        report.write(args.out)
    return 0 if report.passed else 1


EXPERIMENT_KEYS = ("n", "f", "g", "eta", "delta", "lam", "eta_lo", "eta_hi", "k_r", "k0", "zeta", "replicates",
                   "model", "variant", "method", "balanced", "min_success", "workers")


def cmd_experiment(args) -> int:
    values = _config_defaults(args.config)
    for key in EXPERIMENT_KEYS:
        v = getattr(args, key)
        if v is not None:
            values[key] = v
    values["seed"] = args.seed
    cfg = ExperimentConfig.from_mapping(values)
    report = run_experiment(cfg)
    sys.stdout.write(report.to_text())
    if args.out:
        report.write(args.out)
    return 0 if report.passed else 1


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="indelphy", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="evolve sequences down a Newick tree")
    s.add_argument("--tree", required=True, help="Newick file; branch lengths are times")
    s.add_argument("--k-r", dest="k_r", type=float, help="root sequence length")
    s.add_argument("--eta", type=float)
    s.add_argument("--delta", type=float)
    s.add_argument("--lam", type=float)
    s.add_argument("--model", choices=("cfn", "jc"))
    s.add_argument("--seed", type=int, help="base seed (default 0)")
    s.add_argument("--internal", action="store_true", help="also write internal node sequences")
    s.add_argument("--ancestry", help="write a site-label sidecar file")
    s.add_argument("--config")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_simulate)

    e = sub.add_parser("estimate", help="pairwise distance matrix from sequences")
    e.add_argument("--seqs", required=True)
    e.add_argument("--k0", type=int)
    e.add_argument("--zeta", type=float)
    e.add_argument("--variant", choices=VARIANTS)
    e.add_argument("--eps-log", dest="eps_log", type=float)
    e.add_argument("--delta-u-c", dest="delta_u_c", type=float)
    e.add_argument("--model", choices=("cfn", "jc"))
    e.add_argument("--config")
    e.add_argument("--out", required=True)
    e.set_defaults(func=cmd_estimate)

    r = sub.add_parser("reconstruct", help="topology from a distance matrix")
    r.add_argument("--matrix", required=True)
    r.add_argument("--method", choices=("buneman", "nj"), default="buneman")
    r.add_argument("--truth", help="Newick file to score against (exit 1 unless RF = 0)")
    r.add_argument("--out")
    r.set_defaults(func=cmd_reconstruct)

    v = sub.add_parser("validate", help="Monte Carlo checks of the closed-form results")
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--scale", choices=sorted(SCALES), default="full")
    v.add_argument("--z-max", dest="z_max", type=float, default=5.0)
    v.add_argument("--out", help="directory for report.txt and CSV tables")
    v.set_defaults(func=cmd_validate)

    x = sub.add_parser("experiment", help="end-to-end reconstruction sweep")
    x.add_argument("--seed", type=int, required=True)
    x.add_argument("--config")
    x.add_argument("--n", type=int)
    x.add_argument("--f", type=float)
    x.add_argument("--g", type=float)
    x.add_argument("--eta", type=float)
    x.add_argument("--delta", type=float)
    x.add_argument("--lam", type=float)
    x.add_argument("--eta-lo", dest="eta_lo", type=float)
    x.add_argument("--eta-hi", dest="eta_hi", type=float)
    x.add_argument("--k-r", dest="k_r", help="comma-separated root lengths")
    x.add_argument("--k0", type=int)
    x.add_argument("--zeta", type=float)
    x.add_argument("--replicates", type=int)
    x.add_argument("--model", choices=("cfn", "jc"))
    x.add_argument("--variant", choices=VARIANTS)
    x.add_argument("--method", choices=("buneman", "nj"))
    x.add_argument("--balanced", action="store_const", const="true")
    x.add_argument("--min-success", dest="min_success", type=float)
    x.add_argument("--workers", type=int)
    x.add_argument("--out", help="directory for report.txt and CSV tables")
    x.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())

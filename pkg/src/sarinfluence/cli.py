"""Command-line pipeline: graph, simulate, fit, compare, diagnose.

Each command reads a JSON config (paths resolved relative to the config
file), computes everything in memory and only then writes its outputs.
Exit codes: 0 success, 1 usage/config error, 2 numerical failure.
"""

import argparse
import os
import sys
from pathlib import Path

import numpy as np

from sarinfluence import io
from sarinfluence.criteria import ComparisonEntry, CriteriaError, compare
from sarinfluence.divergence import (
    DIST_CODES,
    AuxiliaryDensity,
    DivergenceError,
    bregman_divergence,
    is_divergence,
    kl_divergence,
)
from sarinfluence.graph import GraphError, build_adjacency, edge_list, random_adjacency, row_standardize
from sarinfluence.model import (
    PriorConfig,
    SarDataset,
    SarParams,
    SingularSystemError,
    contaminate,
    impute_yhat,
    pointwise_log_likelihood_draws,
    sar_simulate,
)
from sarinfluence.plotting import comparison_svg, divergence_svg, overlay_svg
from sarinfluence.sampler import PosteriorDraws, SamplerError, fit, summarize

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


class UsageError(ValueError):
    pass


NUMERIC_ERRORS = (SingularSystemError, SamplerError, DivergenceError, ArithmeticError)
USAGE_ERRORS = (UsageError, io.InputError, GraphError, CriteriaError, ValueError, IndexError, KeyError)


def _resolve(base, p):
    p = Path(p)
    return p if p.is_absolute() else base / p


def _seed(args, cfg):
    if args.seed is None:
        raise UsageError(f"{args.command}: --seed is required")
    if "seed" in cfg and int(cfg["seed"]) != args.seed:
        raise UsageError(f"config seed {cfg['seed']} disagrees with --seed {args.seed}")
    return args.seed


def _graph_from_config(gcfg, rng):
    n = int(gcfg["n"])
    if "nodes" in gcfg:
        nodes = np.asarray(gcfg["nodes"])
        A = build_adjacency(nodes, n)
    else:
        if rng is None:
            raise UsageError("random graph generation needs --seed")
        A, nodes = random_adjacency(n, rng, int(gcfg.get("edges_per_node", 2)))
    return A, row_standardize(A), nodes


def _graph_files(A, W):
    return {
        "A.csv": io.matrix_text(A),
        "W.csv": io.matrix_text(W),
        "edges.csv": io.table_text(["source", "target"], edge_list(A).tolist()),
    }


def _prior(cfg):
    p = cfg.get("prior", {})
    if isinstance(p, (list, tuple)):
        return PriorConfig.from_vector(p)
    return PriorConfig(**p)


def _dataset(cfg, base, y_key="y"):
    y = io.read_vector(_resolve(base, cfg[y_key]))
    W = io.read_matrix(_resolve(base, cfg["W"]))
    X = None
    if cfg.get("X"):
        X = io.read_matrix(_resolve(base, cfg["X"]))
        cols = cfg.get("columns")
        if cols is not None:
            X = X[:, list(cols)]
    if W.shape != (y.size, y.size):
        raise UsageError(f"W has shape {W.shape} but y has length {y.size}")
    if X is not None and X.shape[0] != y.size:
        raise UsageError(f"X has {X.shape[0]} rows but y has length {y.size}")
    return SarDataset(y, X, W)


# --- commands --------------------------------------------------------------

def cmd_graph(args, cfg, base):
    rng = np.random.default_rng(args.seed) if args.seed is not None else None
    if "nodes" not in cfg:
        _seed(args, cfg)
    A, W, nodes = _graph_from_config(cfg, rng)
    files = _graph_files(A, W)
    files["graph.json"] = io.json_text(
        {"command": "graph", "config": cfg, "seed": args.seed, "nodes": nodes,
         "n_edges": int(A.sum() // 2)}
    )
    return files, f"seed: {args.seed}"


def cmd_simulate(args, cfg, base):
    seed = _seed(args, cfg)
    rng = np.random.default_rng(seed)
    files = {}
    if "W" in cfg:
        W = io.read_matrix(_resolve(base, cfg["W"]))
    elif "graph" in cfg:
        A, W, _ = _graph_from_config(cfg["graph"], rng)
        files.update(_graph_files(A, W))
    else:
        raise UsageError("simulate config needs 'W' or 'graph'")
    n = W.shape[0]
    params = SarParams(float(cfg["rho"]), float(cfg["sigma"]), cfg["beta"])
    k = params.beta.size - 1
    if cfg.get("X"):
        X = io.read_matrix(_resolve(base, cfg["X"]))
    else:
        cov = cfg.get("covariates", {"means": [-1.0, 2.0]})
        means = cov.get("means", [])
        sd = float(cov.get("sd", 1.0))
        X = np.column_stack([rng.normal(m, sd, n) for m in means]) if means else np.empty((n, 0))
        files["X.csv"] = io.matrix_text(X) if X.shape[1] else ""
    if X.shape[0] != n or X.shape[1] < k:
        raise UsageError(f"need an {n} x >={k} covariate matrix, got {X.shape}")
    y = sar_simulate(W, X[:, :k], params, rng)
    files["y.csv"] = io.vector_text(y)
    if "contaminate" in cfg:
        c = cfg["contaminate"]
        c = {"position": c} if isinstance(c, int) else c
        z = contaminate(y, int(c["position"]), float(c.get("level", 0.99)))
        files["z.csv"] = io.vector_text(z)
    files["simulate.json"] = io.json_text({"command": "simulate", "config": cfg, "seed": seed})
    return files, f"seed: {seed}"


def cmd_fit(args, cfg, base):
    seed = _seed(args, cfg)
    n_chains = int(cfg.get("n_chains", 2))
    if n_chains not in (2, 3, 4):
        raise UsageError(f"n_chains must be between 2 and 4, got {n_chains}")
    n_iter = int(cfg.get("n_iter", 10000))
    data = _dataset(cfg, base)
    prior = _prior(cfg)
    draws = fit(data, prior, n_chains, n_iter, seed, threads=args.threads)
    ll = pointwise_log_likelihood_draws(data, draws.values)
    resolved = {**cfg, "n_chains": n_chains, "n_iter": n_iter,
                "prior": {"a": prior.a, "b": prior.b, "eta": prior.eta}}
    summary = {"command": "fit", "config": resolved, "seed": seed,
               "n_draws": draws.n_draws, "accept_rates": draws.accept_rates,
               "summary": summarize(draws)}
    files = {
        "draws.csv": io.draws_text(draws),
        "loglik.csv": io.matrix_text(ll),
        "summary.json": io.json_text(summary),
    }
    return files, f"seed: {seed}"


def _models(args, cfg, base):
    models = [(m["label"], _resolve(base, m["loglik"])) for m in cfg.get("models", [])]
    for spec in args.model or []:
        label, _, path = spec.partition("=")
        if not path:
            raise UsageError(f"--model expects LABEL=PATH, got {spec!r}")
        models.append((label, Path(path)))
    if len(models) < 2:
        raise UsageError("compare needs at least two models")
    return models


def cmd_compare(args, cfg, base):
    models = _models(args, cfg, base)
    entries, n = [], None
    for label, path in models:
        ll = io.read_matrix(path)
        if n is not None and ll.shape[1] != n:
            raise UsageError(f"{path}: {ll.shape[1]} observations, expected {n}")
        n = ll.shape[1]
        entries.append(ComparisonEntry.from_loglik(label, ll))
    table, tidy = compare(entries)
    report = {
        "command": "compare",
        "config": {**cfg, "models": [{"label": m, "loglik": p} for m, p in models]},
        "seed": args.seed,
        "table": [e.as_dict() for e in table],
    }
    files = {
        "comparison.json": io.json_text(report),
        "comparison.csv": io.table_text(["model", "criterion", "estimate", "se"], tidy),
        "comparison.svg": comparison_svg(tidy),
    }
    return files, None


def _measures(args, cfg):
    names = args.measure or cfg.get("measures") or ["bregman"]
    out = []
    for name in names:
        if name not in ("kl", "is", "l2", "bregman"):
            raise UsageError(f"unknown measure {name!r}; choose kl, is, l2 or bregman")
        out.append(name)
    return out


def cmd_diagnose(args, cfg, base):
    measures = _measures(args, cfg)
    alpha = float(args.alpha if args.alpha is not None else cfg.get("alpha", 2.0))
    if "bregman" in measures and alpha in (0.0, 1.0):
        alt = "kl" if alpha == 1.0 else "is"
        raise UsageError(
            f"alpha={alpha:g} is not allowed for the bregman measure; use --measure {alt}"
        )
    rtype = int(args.type if args.type is not None else cfg.get("type", 1))
    if rtype not in (1, 2):
        raise UsageError(f"type must be 1 or 2, got {rtype}")
    dist = int(cfg.get("dist", 3))
    if dist not in DIST_CODES:
        raise UsageError(f"dist must be one of 1, 2, 3, 4, got {dist}")
    method = int(args.yhat_method if args.yhat_method is not None else cfg.get("yhat_method", 1))
    if method not in (1, 2):
        raise UsageError(f"yhat_method must be 1 (mean) or 2 (median), got {method}")
    form = cfg.get("yhat_form", "structural")

    data = _dataset(cfg, base)
    values, chains, names = io.read_draws(_resolve(base, cfg["draws"]))
    if values.shape[1] != data.k + 3:
        raise UsageError(
            f"draws have {values.shape[1]} parameters, model needs {data.k + 3}"
        )
    draws = PosteriorDraws(values, chains, names=names)
    prior = _prior(cfg)
    if cfg.get("yhat"):
        yhat = io.read_vector(_resolve(base, cfg["yhat"]))
        yhat_source = "file"
    else:
        yhat = impute_yhat(data, draws, method, form)
        yhat_source = form
    aux = None
    if any(m in ("is", "l2", "bregman") for m in measures):
        aux = AuxiliaryDensity.fit(dist, draws)

    reports = {}
    for m in measures:
        if m == "kl":
            rep = kl_divergence(data, yhat, draws, rtype)
        elif m == "is":
            rep = is_divergence(data, yhat, draws, prior, aux, rtype)
        else:
            a = 2.0 if m == "l2" else alpha
            rep = bregman_divergence(data, yhat, draws, prior, aux, a, rtype)
        reports[m] = rep

    resolved = {**cfg, "measures": measures, "alpha": alpha, "type": rtype, "dist": dist,
                "yhat_method": method, "yhat_form": form,
                "prior": {"a": prior.a, "b": prior.b, "eta": prior.eta}}
    meta = {"yhat_method": {1: "mean", 2: "median"}[method], "yhat_source": yhat_source,
            "dist": DIST_CODES[dist]}
    tidy = [
        {"observation": i + 1, "measure": m, "value": float(v)}
        for m, rep in reports.items()
        for i, v in enumerate(rep.per_obs)
    ]
    files = {
        "divergence.json": io.json_text({
            "command": "diagnose", "config": resolved, "seed": args.seed,
            "imputation": meta, "yhat": yhat,
            "reports": {m: rep.as_dict() for m, rep in reports.items()},
        }),
        "divergence.csv": io.table_text(["observation", "measure", "value"], tidy),
        "divergence.svg": divergence_svg(reports),
    }
    if rtype == 2:
        files["overlay.csv"] = files["divergence.csv"]
        files["overlay.svg"] = overlay_svg(reports)
    if cfg.get("per_draw_csv"):
        for m, rep in reports.items():
            files[f"per_draw_{m}.csv"] = io.matrix_text(rep.per_draw)
    return files, None


COMMANDS = {
    "graph": cmd_graph,
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "compare": cmd_compare,
    "diagnose": cmd_diagnose,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sarinfluence",
        description="Simulate, fit, compare and diagnose Bayesian SAR models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, helptext in (
        ("graph", "build adjacency/weight matrices and an edge list"),
        ("simulate", "simulate SAR responses (optionally contaminated)"),
        ("fit", "sample the posterior; write draws, summary and log-likelihoods"),
        ("compare", "WAIC / LOO-CV comparison of fitted models"),
        ("diagnose", "Bregman-divergence influence diagnostics"),
    ):
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", type=Path, help="JSON configuration file")
        p.add_argument("--seed", type=int, help="random seed (required where randomness is used)")
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
        p.add_argument("--out", type=Path, default=Path("."), help="output directory")
        if name == "compare":
            p.add_argument("--model", action="append", metavar="LABEL=PATH",
                           help="log-likelihood CSV for one model (repeatable)")
        if name == "diagnose":
            p.add_argument("--measure", action="append", choices=["kl", "is", "l2", "bregman"])
            p.add_argument("--alpha", type=float)
            p.add_argument("--type", type=int, choices=[1, 2])
            p.add_argument("--yhat-method", type=int, choices=[1, 2])
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.config is not None:
            cfg = io.load_config(args.config)
            base = args.config.resolve().parent
        elif args.command == "compare":
            cfg, base = {}, Path.cwd()
        else:
            raise UsageError(f"{args.command}: --config is required")
        if args.threads < 1:
            raise UsageError("--threads must be at least 1")
        files, message = COMMANDS[args.command](args, cfg, base)
    except NUMERIC_ERRORS as exc:
        print(f"sarinfluence {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except USAGE_ERRORS as exc:
        print(f"sarinfluence {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    written = io.write_outputs(args.out, files)
    if message:
        print(message)
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())

"""Command-line front end.

Subcommands: fit, reduce, select, simulate, evaluate, benchmark.
Exit codes: 0 success, 1 usage error, 2 I/O or data-format error,
3 numeric/fitting error.  Progress goes to stderr; data written to files
or stdout stays machine-readable.
"""

from __future__ import annotations

import argparse
import csv
import os
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import io as gio
from .datasets import AUGMENTATIONS, SCENARIO_BASES, ScenarioSpec, generate
from .errors import (
    AllFitsFailedError,
    ArchiveError,
    DataFormatError,
    DegenerateComponentError,
    GmmdrError,
    SingularCovarianceError,
)
from .metrics import adjusted_rand_index, confusion_matrix, error_rate, pca_gmm
from .mixture import FitConfig, map_classify, model_search
from .models import model_names
from .selection import SelectionConfig, gmmdr_pipeline
from .subspace import density_grid, estimate_directions, project_data, project_params

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_IO = 2
EXIT_NUMERIC = 3


class _Parser(argparse.ArgumentParser):
    """argparse with usage failures mapped to exit code 1."""

    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _log(msg: str) -> None:
    print(msg, file=sys.stderr, flush=True)


def _add_fit_flags(p: argparse.ArgumentParser, default_max_g: int = 9) -> None:
    p.add_argument("--models", default="all", help="comma-separated model codes or 'all'")
    p.add_argument("--g", type=int, default=None, help="fixed number of components")
    p.add_argument("--min-g", type=int, default=1)
    p.add_argument("--max-g", type=int, default=default_max_g)
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--init", default="kmeans", choices=("kmeans", "random", "hierarchical"))
    p.add_argument("--restarts", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)


def _fit_config(args) -> FitConfig:
    return FitConfig(
        max_iter=args.max_iter,
        rel_tol=args.tol,
        init=args.init,
        restarts=args.restarts,
        seed=args.seed,
    )


def _g_range(args):
    if args.g is not None:
        return [args.g]
    return (args.min_g, args.max_g)


def _model_list(args, p: int):
    if args.models == "all":
        return list(model_names(p))
    return [m.strip() for m in args.models.split(",") if m.strip()]


def _read_input(args) -> gio.TabularData:
    label = getattr(args, "label_column", None)
    return gio.read_csv(
        args.input,
        label_column=label,
        standardize=getattr(args, "standardize", False),
    )


def _print_bic_table(result, g_values) -> None:
    table = result.bic_table()
    models = sorted({m for (m, _) in table}, key=str)
    print("BIC by model and number of components (larger is better)")
    head = "model " + "".join(f"{'G=' + str(g):>12}" for g in g_values)
    print(head)
    for m in models:
        cells = []
        for g in g_values:
            v = table.get((m, g))
            cells.append(f"{v:12.2f}" if v is not None else f"{'--':>12}")
        print(f"{m:<6}" + "".join(cells))
    best = result.best
    print(
        f"best: model={best.model} G={best.n_components} BIC={best.bic:.2f} "
        f"loglik={best.loglik:.2f} params={best.nparams}"
    )
    for f in result.failures:
        _log(f"fit failed: {f.model} G={f.n_components}: {f.reason}")


def cmd_fit(args) -> int:
    tab = _read_input(args)
    config = _fit_config(args)
    result = model_search(tab.data, _g_range(args), _model_list(args, tab.data.shape[1]), config)
    g_values = [args.g] if args.g is not None else list(range(args.min_g, args.max_g + 1))
    _print_bic_table(result, g_values)
    if args.output:
        prov = gio.make_provenance(config, tab.data, command="fit", input=str(args.input))
        gio.save_model(gio.ModelArchive(mixture=result.best, provenance=prov), args.output)
        _log(f"archive written to {args.output}")
    return EXIT_OK


def cmd_reduce(args) -> int:
    tab = _read_input(args)
    X = tab.data
    config = _fit_config(args)
    if args.archive:
        fit = gio.load_model(args.archive).mixture
    else:
        fit = model_search(X, _g_range(args), _model_list(args, X.shape[1]), config).best
    basis = estimate_directions(fit, X, eig_threshold=args.eig_threshold)
    if basis.d == 0:
        _log("no informative directions (single-component fit)")
        return EXIT_NUMERIC
    os.makedirs(args.output_dir, exist_ok=True)
    out = lambda name: os.path.join(args.output_dir, name)

    prov = gio.make_provenance(config, X, command="reduce", input=str(args.input))
    gio.save_model(gio.ModelArchive(mixture=fit, basis=basis, provenance=prov), out("model" + gio.ARCHIVE_SUFFIX))
    gio.export_plotdata("eigen_contrib", out("eigen_contrib.csv"), basis=basis)
    gio.export_plotdata(
        "coefficients", out("coefficients.csv"), basis=basis, feature_names=tab.feature_names
    )
    labels, uncertainty = map_classify(fit, X)
    coords = project_data(X, basis)
    gio.export_plotdata(
        "projection",
        out("projection.csv"),
        coordinates=coords,
        labels=labels,
        uncertainty=uncertainty,
    )
    if basis.d >= 2:
        mu2, cov2 = project_params(fit, basis, 2)
        z = coords[:, :2]
        pad = 0.08 * (z.max(axis=0) - z.min(axis=0))
        gx = np.linspace(z[:, 0].min() - pad[0], z[:, 0].max() + pad[0], args.grid)
        gy = np.linspace(z[:, 1].min() - pad[1], z[:, 1].max() + pad[1], args.grid)
        grid = density_grid(fit.weights, mu2, cov2, gx, gy)
        gio.export_plotdata("density_grid", out("density_grid.csv"), grid=grid)
    _log(f"{basis.d} directions written to {args.output_dir}")
    print(f"directions={basis.d}")
    for i in range(basis.d):
        print(
            f"dir{i + 1}: eigenvalue={basis.eigenvalues[i]:.6g} "
            f"mean_contrib={basis.mean_contrib[i]:.6g} var_contrib={basis.var_contrib[i]:.6g}"
        )
    return EXIT_OK


def cmd_select(args) -> int:
    tab = _read_input(args)
    X = tab.data
    config = _fit_config(args)
    fixed = None
    if args.fixed_model:
        code, _, g = args.fixed_model.partition(",")
        fixed = (code.strip(), int(g))
    selection = SelectionConfig(
        max_g=args.selection_max_g,
        models=args.models if args.models != "all" else "all",
        fixed_model=fixed,
        fit=FitConfig(rel_tol=args.selection_tol, init=args.init, seed=args.seed),
        mode=args.selection_mode,
    )
    result = gmmdr_pipeline(
        X,
        fit_config=config,
        selection=selection,
        g_range=_g_range(args),
        models=_model_list(args, X.shape[1]),
        eig_threshold=args.eig_threshold,
    )
    os.makedirs(args.output_dir, exist_ok=True)
    out = lambda name: os.path.join(args.output_dir, name)
    prov = gio.make_provenance(config, X, command="select", input=str(args.input))
    trace = result.traces[-1] if result.traces else None
    gio.save_model(
        gio.ModelArchive(mixture=result.fit, basis=result.basis, trace=trace, provenance=prov),
        out("model" + gio.ARCHIVE_SUFFIX),
    )
    if result.basis.d > 0:
        gio.export_plotdata("eigen_contrib", out("eigen_contrib.csv"), basis=result.basis)
        gio.export_plotdata(
            "coefficients",
            out("coefficients.csv"),
            basis=result.basis,
            feature_names=tab.feature_names,
        )
        gio.export_plotdata(
            "projection",
            out("projection.csv"),
            coordinates=result.variables,
            labels=result.labels,
            uncertainty=result.uncertainty,
        )
    print(
        f"final: model={result.fit.model} G={result.fit.n_components} "
        f"directions={result.basis.d} BIC={result.fit.bic:.2f} converged={result.converged}"
    )
    for i, it in enumerate(result.history):
        print(
            f"pass {i + 1}: candidates={it.n_candidates} selected={it.n_selected} "
            f"model={it.model} G={it.n_components}"
        )
    if tab.labels is not None:
        ari = adjusted_rand_index(tab.labels, result.labels)
        print(f"ARI={ari:.4f}")
    _log(f"outputs written to {args.output_dir}")
    return EXIT_OK


def _parse_priors(text):
    if not text:
        return None
    vals = tuple(float(v) for v in text.split(","))
    return vals


def cmd_simulate(args) -> int:
    spec = ScenarioSpec(
        base=args.base,
        n_per_cluster=args.n_per_cluster,
        n_total=args.n,
        priors=_parse_priors(args.priors),
        augmentation=args.augmentation,
        highdim_k=args.highdim_k,
        seed=args.seed,
    )
    ds = generate(spec)
    gio.write_csv(args.output, ds.data, labels=ds.labels)
    _log(
        f"{ds.data.shape[0]}x{ds.data.shape[1]} dataset "
        f"({len(ds.clustering_columns)} clustering columns) written to {args.output}"
    )
    return EXIT_OK


def cmd_evaluate(args) -> int:
    tab = gio.read_csv(args.input, label_column=args.label_column, standardize=args.standardize)
    if tab.labels is None:
        raise DataFormatError("evaluate requires --label-column with true classes")
    if args.archive:
        archive = gio.load_model(args.archive)
        if archive.basis is not None and archive.basis.n_features == tab.data.shape[1] \
                and archive.mixture.n_features == archive.basis.d:
            coords = tab.data @ archive.basis.directions
            predicted, _ = map_classify(archive.mixture, coords)
        else:
            predicted, _ = map_classify(archive.mixture, tab.data)
    elif args.pred_column:
        pred_tab = gio.read_csv(args.input, label_column=args.pred_column)
        predicted = pred_tab.labels
    else:
        raise DataFormatError("evaluate needs --archive or --pred-column")
    ari = adjusted_rand_index(tab.labels, predicted)
    table = confusion_matrix(tab.labels, predicted)
    print(f"ARI={ari:.4f}")
    kt, kp = table.shape
    if max(kt, kp) <= 10:
        err = error_rate(tab.labels, predicted)
        print(f"error_rate={err:.4f}")
    print("confusion (rows=truth, cols=predicted):")
    for row in table:
        print(" ".join(f"{v:6d}" for v in row))
    return EXIT_OK


# --- benchmark ---------------------------------------------------------------

METHODS = ("gmm", "pca_gmm", "gmmdr")


def _benchmark_replicate(task: dict) -> list[dict]:
    """One replicate: generate data, run each method, return result rows."""
    spec = ScenarioSpec(
        base=task["base"],
        n_total=task["n"],
        priors=task["priors"],
        augmentation=task["augmentation"],
        highdim_k=task["highdim_k"],
        seed=task["seed"] + task["rep"],  # per-replicate stream
    )
    ds = generate(spec)
    config = FitConfig(seed=spec.seed, rel_tol=task["tol"])
    rows = []
    for method in task["methods"]:
        row = {
            "scenario": task["base"],
            "augmentation": task["augmentation"],
            "n": task["n"],
            "method": method,
            "rep": task["rep"],
            "seed": spec.seed,
            "ari": "",
            "model": "",
            "G": "",
            "error": "",
        }
        try:
            if method == "gmm":
                fit = model_search(ds.data, (1, task["max_g"]), "all", config).best
                labels, _ = map_classify(fit, ds.data)
            elif method == "pca_gmm":
                res = pca_gmm(ds.data, (1, task["max_g"]), "all", config)
                fit = res.fit
                labels, _ = map_classify(fit, res.scores)
            else:
                out = gmmdr_pipeline(
                    ds.data,
                    fit_config=config,
                    selection=SelectionConfig(
                        max_g=task["selection_max_g"],
                        fit=FitConfig(rel_tol=1e-5, seed=spec.seed),
                        mode=task["selection_mode"],
                    ),
                    g_range=(1, task["max_g"]),
                )
                fit = out.fit
                labels = out.labels
            row["ari"] = repr(adjusted_rand_index(ds.labels, labels))
            row["model"] = fit.model
            row["G"] = str(fit.n_components)
        except GmmdrError as err:
            row["error"] = str(err)
        rows.append(row)
    return rows


def cmd_benchmark(args) -> int:
    methods = [m.strip() for m in args.methods.split(",") if m.strip()]
    for m in methods:
        if m not in METHODS:
            raise DataFormatError(f"unknown method {m!r}; choose from {METHODS}")
    task_base = {
        "base": args.base,
        "augmentation": args.augmentation,
        "n": args.n,
        "priors": _parse_priors(args.priors),
        "highdim_k": args.highdim_k,
        "seed": args.seed,
        "methods": methods,
        "max_g": args.max_g,
        "selection_max_g": args.selection_max_g,
        "selection_mode": args.selection_mode,
        "tol": args.tol,
    }
    tasks = [dict(task_base, rep=r) for r in range(args.reps)]
    if args.jobs > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            all_rows = list(pool.map(_benchmark_replicate, tasks))
    else:
        all_rows = []
        for t in tasks:
            all_rows.append(_benchmark_replicate(t))
            _log(f"replicate {t['rep'] + 1}/{args.reps} done")
    rows = [r for chunk in all_rows for r in chunk]

    os.makedirs(args.output_dir, exist_ok=True)
    rep_path = os.path.join(args.output_dir, "replicates.csv")
    fields = ["scenario", "augmentation", "n", "method", "rep", "seed", "ari", "model", "G", "error"]
    gio._atomic_write_rows(rep_path, [fields] + [[str(r[f]) for f in fields] for r in rows])

    summary = [["scenario", "augmentation", "n", "method", "reps_ok", "mean_ari", "se_ari"]]
    print(f"{'method':<10}{'reps':>6}{'mean ARI':>12}{'se':>10}")
    for method in methods:
        values = [float(r["ari"]) for r in rows if r["method"] == method and r["ari"] != ""]
        mean = np.mean(values) if values else float("nan")
        se = (
            repr(float(np.std(values, ddof=1) / np.sqrt(len(values))))
            if len(values) > 1
            else "NA"
        )
        summary.append(
            [args.base, args.augmentation, str(args.n), method, str(len(values)), repr(float(mean)), se]
        )
        se_txt = f"{float(se):.4f}" if se != "NA" else "NA"
        print(f"{method:<10}{len(values):>6}{mean:>12.4f}{se_txt:>10}")
    gio._atomic_write_rows(os.path.join(args.output_dir, "summary.csv"), summary)
    _log(f"benchmark outputs written to {args.output_dir}")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="gmmdr", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("fit", help="BIC model search over covariance families")
    p.add_argument("--input", required=True)
    p.add_argument("--label-column", default=None)
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--output", default=None, help="archive path (.gmmdr.json)")
    _add_fit_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("reduce", help="estimate directions and export plot data")
    p.add_argument("--input", required=True)
    p.add_argument("--label-column", default=None)
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--archive", default=None, help="reuse a fitted archive")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--eig-threshold", type=float, default=1e-8)
    p.add_argument("--grid", type=int, default=60, help="density grid resolution")
    _add_fit_flags(p)
    p.set_defaults(func=cmd_reduce)

    p = sub.add_parser("select", help="full pipeline with direction selection")
    p.add_argument("--input", required=True)
    p.add_argument("--label-column", default=None)
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--output-dir", required=True)
    p.add_argument("--eig-threshold", type=float, default=1e-8)
    p.add_argument("--selection-max-g", type=int, default=9)
    p.add_argument("--selection-mode", default="bic", choices=("bic", "entropy"))
    p.add_argument("--selection-tol", type=float, default=1e-5)
    p.add_argument("--fixed-model", default=None, metavar="MODEL,G")
    _add_fit_flags(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("simulate", help="materialize a synthetic scenario to CSV")
    p.add_argument("--base", required=True, choices=SCENARIO_BASES)
    p.add_argument("--n", type=int, default=None, help="total observations")
    p.add_argument("--n-per-cluster", type=int, default=None)
    p.add_argument("--priors", default=None, help="comma-separated mixing probabilities")
    p.add_argument("--augmentation", default="none", choices=AUGMENTATIONS)
    p.add_argument("--highdim-k", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("evaluate", help="compare predicted labels to true classes")
    p.add_argument("--input", required=True)
    p.add_argument("--label-column", required=True)
    p.add_argument("--standardize", action="store_true")
    p.add_argument("--archive", default=None)
    p.add_argument("--pred-column", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("benchmark", help="replicate scenario comparisons")
    p.add_argument("--base", required=True, choices=[b for b in SCENARIO_BASES if b != "chang15"])
    p.add_argument("--augmentation", default="noise", choices=AUGMENTATIONS)
    p.add_argument("--n", type=int, default=300)
    p.add_argument("--priors", default=None)
    p.add_argument("--highdim-k", type=int, default=1)
    p.add_argument("--reps", type=int, default=10)
    p.add_argument("--methods", default="gmm,pca_gmm,gmmdr")
    p.add_argument("--max-g", type=int, default=15)
    p.add_argument("--selection-max-g", type=int, default=9)
    p.add_argument("--selection-mode", default="bic", choices=("bic", "entropy"))
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--output-dir", required=True)
    p.set_defaults(func=cmd_benchmark)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except FileNotFoundError as err:
        _log(f"error: {err}")
        return EXIT_IO
    except (DataFormatError, ArchiveError) as err:
        _log(f"error: {err}")
        return EXIT_IO
    except (
        DegenerateComponentError,
        AllFitsFailedError,
        SingularCovarianceError,
    ) as err:
        _log(f"numeric error: {err}")
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

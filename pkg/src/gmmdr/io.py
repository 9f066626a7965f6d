"""CSV ingestion, model archives and plot-data export.

Archives are versioned JSON (extension ``.gmmdr.json``) with floats written
in shortest round-trip form, so numeric payloads survive save/load bit for
bit.  All writes go through a temp file and an atomic rename.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import tempfile
from dataclasses import dataclass, field

import numpy as np

from .errors import ArchiveError, DataFormatError
from .mixture import FitConfig, MixtureFit, bic, count_params
from .selection import SelectionStep, SelectionTrace
from .subspace import DrBasis

SCHEMA_VERSION = 1
ARCHIVE_KIND = "gmmdr-archive"
ARCHIVE_SUFFIX = ".gmmdr.json"

PLOT_KINDS = ("eigen_contrib", "coefficients", "projection", "density_grid", "uncertainty")


@dataclass(frozen=True)
class TabularData:
    """A numeric matrix with optional labels and column names."""

    data: np.ndarray
    labels: np.ndarray | None = None
    feature_names: list[str] | None = None
    label_levels: list[str] | None = field(default=None, repr=False)


def _looks_numeric(cell: str) -> bool:
    try:
        float(cell)
        return True
    except ValueError:
        return False


def read_csv(
    path,
    header: bool | str = "auto",
    label_column: str | int | None = None,
    standardize: bool = False,
) -> TabularData:
    """Read a rectangular numeric CSV, optionally peeling off a label column.

    ``header="auto"`` treats the first row as names when it is not fully
    numeric.  ``label_column`` picks a column by name or 0-based position;
    its values may be non-numeric and are mapped to dense 1..k codes in
    sorted order.  ``standardize`` rescales every feature column to mean 0,
    standard deviation 1 (MLE scale) and rejects constant columns.
    """
    with open(path, "r", encoding="utf-8", newline="") as handle:
        rows = [row for row in csv.reader(handle) if row]
    if not rows:
        raise DataFormatError(f"{path}: empty file")

    width = len(rows[0])
    for i, row in enumerate(rows):
        if len(row) != width:
            raise DataFormatError(
                f"{path}: ragged row {i + 1} has {len(row)} cells, expected {width}"
            )

    if header == "auto":
        header = not all(_looks_numeric(c) for c in rows[0])
    if header:
        names = [c.strip() for c in rows[0]]
        body = rows[1:]
    else:
        names = [f"x{j + 1}" for j in range(width)]
        body = rows
    if not body:
        raise DataFormatError(f"{path}: no data rows")

    label_idx: int | None = None
    if label_column is not None:
        if isinstance(label_column, int):
            label_idx = label_column
        else:
            if label_column not in names:
                raise DataFormatError(f"{path}: no column named {label_column!r}")
            label_idx = names.index(label_column)
        if not 0 <= label_idx < width:
            raise DataFormatError(f"{path}: label column {label_column!r} out of range")

    feature_idx = [j for j in range(width) if j != label_idx]
    data = np.empty((len(body), len(feature_idx)))
    for i, row in enumerate(body):
        for k, j in enumerate(feature_idx):
            cell = row[j].strip()
            if not _looks_numeric(cell):
                raise DataFormatError(
                    f"{path}: non-numeric cell {cell!r} at row {i + 1 + int(header)}, "
                    f"column {names[j]!r}"
                )
            data[i, k] = float(cell)

    labels = None
    levels = None
    if label_idx is not None:
        raw = [row[label_idx].strip() for row in body]
        if all(_looks_numeric(v) for v in raw):
            levels = sorted(set(raw), key=float)
        else:
            levels = sorted(set(raw))
        labels = np.array([levels.index(v) + 1 for v in raw], dtype=np.int64)

    feature_names = [names[j] for j in feature_idx]
    if standardize:
        sd = data.std(axis=0)
        flat = np.flatnonzero(sd == 0)
        if flat.size:
            bad = ", ".join(feature_names[j] for j in flat)
            raise DataFormatError(f"{path}: constant column(s) cannot be standardized: {bad}")
        data = (data - data.mean(axis=0)) / sd
    return TabularData(data=data, labels=labels, feature_names=feature_names, label_levels=levels)


def write_csv(path, data, feature_names=None, labels=None, label_name="class") -> None:
    """Write a matrix (and optional labels) as CSV with full-precision floats."""
    data = np.asarray(data)
    names = feature_names or [f"x{j + 1}" for j in range(data.shape[1])]
    rows = []
    header = list(names) + ([label_name] if labels is not None else [])
    for i in range(data.shape[0]):
        row = [repr(float(v)) for v in data[i]]
        if labels is not None:
            row.append(str(int(labels[i])))
        rows.append(row)
    _atomic_write_rows(path, [header] + rows)


def _atomic_write_rows(path, rows) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            csv.writer(handle).writerows(rows)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_text(path, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# --- model archives ----------------------------------------------------------


@dataclass(frozen=True)
class ModelArchive:
    """Serializable bundle: fitted mixture, optional basis/trace, provenance."""

    mixture: MixtureFit
    basis: DrBasis | None = None
    trace: SelectionTrace | None = None
    provenance: dict | None = None


def data_fingerprint(data) -> str:
    """SHA-256 of the raw float64 bytes plus the shape."""
    arr = np.ascontiguousarray(data, dtype=np.float64)
    digest = hashlib.sha256()
    digest.update(str(arr.shape).encode())
    digest.update(arr.tobytes())
    return digest.hexdigest()


def config_fingerprint(config: FitConfig) -> str:
    payload = json.dumps(
        {
            "max_iter": config.max_iter,
            "rel_tol": config.rel_tol,
            "init": config.init,
            "restarts": config.restarts,
            "seed": config.seed,
            "variance_floor": config.variance_floor,
        },
        sort_keys=True,
    )
    return hashlib.sha256(payload.encode()).hexdigest()


def make_provenance(config: FitConfig | None = None, data=None, **extra) -> dict:
    out = dict(extra)
    if config is not None:
        out["seed"] = config.seed
        out["config"] = {
            "max_iter": config.max_iter,
            "rel_tol": config.rel_tol,
            "init": config.init,
            "restarts": config.restarts,
            "seed": config.seed,
            "variance_floor": config.variance_floor,
        }
        out["config_hash"] = config_fingerprint(config)
    if data is not None:
        out["data_fingerprint"] = data_fingerprint(data)
    return out


def _mixture_payload(fit: MixtureFit) -> dict:
    return {
        "model": fit.model,
        "n_components": fit.n_components,
        "weights": fit.weights.tolist(),
        "means": fit.means.tolist(),
        "covariances": fit.covariances.tolist(),
        "loglik": fit.loglik,
        "nparams": fit.nparams,
        "bic": fit.bic,
        "responsibilities": fit.responsibilities.tolist(),
        "converged": bool(fit.converged),
        "iterations": int(fit.iterations),
        "loglik_path": None if fit.loglik_path is None else fit.loglik_path.tolist(),
    }


def _mixture_from_payload(d: dict) -> MixtureFit:
    path = d.get("loglik_path")
    return MixtureFit(
        model=d["model"],
        n_components=int(d["n_components"]),
        weights=np.array(d["weights"]),
        means=np.array(d["means"]),
        covariances=np.array(d["covariances"]),
        loglik=float(d["loglik"]),
        nparams=int(d["nparams"]),
        bic=float(d["bic"]),
        responsibilities=np.array(d["responsibilities"]),
        converged=bool(d["converged"]),
        iterations=int(d["iterations"]),
        loglik_path=None if path is None else np.array(path),
    )


def _basis_payload(basis: DrBasis) -> dict:
    return {
        "raw_vectors": basis.raw_vectors.tolist(),
        "directions": basis.directions.tolist(),
        "eigenvalues": basis.eigenvalues.tolist(),
        "mean_contrib": basis.mean_contrib.tolist(),
        "var_contrib": basis.var_contrib.tolist(),
    }


def _basis_from_payload(d: dict) -> DrBasis:
    return DrBasis(
        raw_vectors=np.array(d["raw_vectors"]).reshape(len(d["raw_vectors"]), -1),
        directions=np.array(d["directions"]).reshape(len(d["directions"]), -1),
        eigenvalues=np.array(d["eigenvalues"]),
        mean_contrib=np.array(d["mean_contrib"]),
        var_contrib=np.array(d["var_contrib"]),
    )


def _trace_payload(trace: SelectionTrace) -> dict:
    return {
        "steps": [
            {
                "candidate": s.candidate,
                "bic_clustering": s.bic_clustering,
                "bic_no_clustering": s.bic_no_clustering,
                "bic_difference": s.bic_difference,
                "accepted": s.accepted,
                "model": s.model,
                "n_components": s.n_components,
            }
            for s in trace.steps
        ],
        "selected": list(trace.selected),
        "stop_reason": trace.stop_reason,
    }


def _trace_from_payload(d: dict) -> SelectionTrace:
    steps = [
        SelectionStep(
            candidate=int(s["candidate"]),
            bic_clustering=float(s["bic_clustering"]),
            bic_no_clustering=float(s["bic_no_clustering"]),
            bic_difference=float(s["bic_difference"]),
            accepted=bool(s["accepted"]),
            model=s["model"],
            n_components=int(s["n_components"]),
        )
        for s in d["steps"]
    ]
    return SelectionTrace(steps, [int(i) for i in d["selected"]], d["stop_reason"])


def save_model(archive: ModelArchive, path) -> None:
    """Write an archive atomically as versioned JSON."""
    payload = {
        "kind": ARCHIVE_KIND,
        "schema_version": SCHEMA_VERSION,
        "mixture": _mixture_payload(archive.mixture),
        "basis": None if archive.basis is None else _basis_payload(archive.basis),
        "trace": None if archive.trace is None else _trace_payload(archive.trace),
        "provenance": archive.provenance,
    }
    _atomic_write_text(path, json.dumps(payload, indent=1))


def load_model(path) -> ModelArchive:
    """Load an archive, validating kind and schema version."""
    try:
        with open(path, "r", encoding="utf-8") as handle:
            payload = json.load(handle)
    except json.JSONDecodeError as err:
        raise ArchiveError(f"{path}: corrupt archive: {err}")
    if not isinstance(payload, dict) or payload.get("kind") != ARCHIVE_KIND:
        raise ArchiveError(f"{path}: not a model archive")
    version = payload.get("schema_version")
    if not isinstance(version, int) or version > SCHEMA_VERSION:
        raise ArchiveError(
            f"{path}: schema version {version!r} is newer than supported ({SCHEMA_VERSION})"
        )
    basis = payload.get("basis")
    trace = payload.get("trace")
    return ModelArchive(
        mixture=_mixture_from_payload(payload["mixture"]),
        basis=None if basis is None else _basis_from_payload(basis),
        trace=None if trace is None else _trace_from_payload(trace),
        provenance=payload.get("provenance"),
    )


# --- plot-data export --------------------------------------------------------


def export_plotdata(kind: str, path, **inputs) -> None:
    """Write columnar CSV backing one plot kind.

    eigen_contrib: basis -> direction, eigenvalue, mean_contrib, var_contrib.
    coefficients: basis [, feature_names] -> variable, dir1..dird.
    projection: coordinates [, labels, uncertainty] -> coord*, label, uncertainty.
    density_grid: grid (GridDensity) -> x, y, density, component.
    uncertainty: grid coordinates + fit posteriors -> x, y, uncertainty.
    """
    if kind not in PLOT_KINDS:
        raise ValueError(f"unknown plot kind {kind!r}; choose from {PLOT_KINDS}")
    if kind == "eigen_contrib":
        basis: DrBasis = inputs["basis"]
        rows = [["direction", "eigenvalue", "mean_contrib", "var_contrib"]]
        for i in range(basis.d):
            rows.append(
                [
                    str(i + 1),
                    repr(float(basis.eigenvalues[i])),
                    repr(float(basis.mean_contrib[i])),
                    repr(float(basis.var_contrib[i])),
                ]
            )
    elif kind == "coefficients":
        basis = inputs["basis"]
        names = inputs.get("feature_names") or [
            f"x{j + 1}" for j in range(basis.n_features)
        ]
        if len(names) != basis.n_features:
            raise ValueError("feature_names length does not match the basis")
        rows = [["variable"] + [f"dir{i + 1}" for i in range(basis.d)]]
        for j, name in enumerate(names):
            rows.append([name] + [repr(float(v)) for v in basis.directions[j]])
    elif kind == "projection":
        coords = np.asarray(inputs["coordinates"], dtype=np.float64)
        labels = inputs.get("labels")
        uncertainty = inputs.get("uncertainty")
        if labels is not None and len(labels) != coords.shape[0]:
            raise ValueError("labels length does not match coordinates")
        if uncertainty is not None and len(uncertainty) != coords.shape[0]:
            raise ValueError("uncertainty length does not match coordinates")
        head = [f"coord{i + 1}" for i in range(coords.shape[1])]
        if labels is not None:
            head.append("label")
        if uncertainty is not None:
            head.append("uncertainty")
        rows = [head]
        for i in range(coords.shape[0]):
            row = [repr(float(v)) for v in coords[i]]
            if labels is not None:
                row.append(str(int(labels[i])))
            if uncertainty is not None:
                row.append(repr(float(uncertainty[i])))
            rows.append(row)
    elif kind == "density_grid":
        grid = inputs["grid"]
        rows = [["x", "y", "density", "component"]]
        for yi, yv in enumerate(grid.y):
            for xi, xv in enumerate(grid.x):
                rows.append(
                    [
                        repr(float(xv)),
                        repr(float(yv)),
                        repr(float(grid.density[yi, xi])),
                        str(int(grid.labels[yi, xi])),
                    ]
                )
    else:  # uncertainty surface over a 2-d grid
        from .mixture import _e_step

        fit: MixtureFit = inputs["fit"]
        x = np.asarray(inputs["x"], dtype=np.float64).ravel()
        y = np.asarray(inputs["y"], dtype=np.float64).ravel()
        if x.size == 0 or y.size == 0:
            raise ValueError("empty grid")
        if fit.n_features != 2:
            raise ValueError("uncertainty surface needs a 2-d (projected) fit")
        xx, yy = np.meshgrid(x, y)
        points = np.column_stack([xx.ravel(), yy.ravel()])
        _, resp = _e_step(points, fit.weights, fit.means, fit.covariances)
        unc = 1.0 - resp.max(axis=1)
        rows = [["x", "y", "uncertainty"]]
        for (px, py), u in zip(points, unc):
            rows.append([repr(float(px)), repr(float(py)), repr(float(u))])
    _atomic_write_rows(path, rows)


def refit_from_archive(archive: ModelArchive, data) -> MixtureFit:
    """Re-run the archived fit from its stored seed/config on given data."""
    from .mixture import em_fit

    prov = archive.provenance or {}
    cfg_dict = prov.get("config")
    if cfg_dict is None:
        raise ArchiveError("archive has no stored fit configuration")
    config = FitConfig(**cfg_dict)
    return em_fit(data, archive.mixture.n_components, archive.mixture.model, config)

"""Dataset ingestion, preparation and reproducible output artifacts.

CSV schema: required columns `outcome` and `treatment`, an optional
`propensity` column, and every remaining numeric column is a covariate in
header order.  Ingestion subtracts the treatment cost from treated
outcomes, derives the outcome cap and the overlap constant, records the
per-column normalisation maxima, and hands everything to the weight
transform.

Every emitted artifact embeds (JSON) or references (CSV comment line) a
run manifest: the resolved configuration plus a digest of the input file,
with no timestamps, so equal manifests give byte-identical outputs.
"""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass

import numpy as np

from . import __version__
from .welfare import DatasetMeta, WeightedSample, compute_weights

__all__ = [
    "Dataset",
    "REQUIRED_COLUMNS",
    "read_table",
    "ingest",
    "prepare_arrays",
    "derive_overlap",
    "write_dataset_csv",
    "build_manifest",
    "manifest_digest",
    "write_json",
    "write_csv",
]

REQUIRED_COLUMNS = ("outcome", "treatment")
OPTIONAL_COLUMNS = ("propensity",)

_PSI_CAP = 0.5 - 1e-9


@dataclass(frozen=True)
class Dataset:
    """Parsed and prepared dataset ready for fitting."""

    outcomes: np.ndarray  # cost-adjusted
    treatment: np.ndarray
    covariates: np.ndarray
    propensity: np.ndarray
    covariate_names: tuple[str, ...]
    meta: DatasetMeta
    sample: WeightedSample


def read_table(path) -> dict[str, np.ndarray]:
    """Read a CSV file into named float columns; '#' lines are comments."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and not r[0].startswith("#")]
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [c.strip() for c in rows[0]]
    body = rows[1:]
    if not body:
        raise ValueError(f"{path}: no data rows")
    columns: dict[str, np.ndarray] = {}
    for j, name in enumerate(header):
        try:
            columns[name] = np.array([float(r[j]) for r in body])
        except (ValueError, IndexError) as exc:
            raise ValueError(f"{path}: column {name!r} is not numeric everywhere") from exc
    return columns


def derive_overlap(propensity: np.ndarray) -> float:
    """Largest valid overlap constant min(min e, 1 - max e), capped below 1/2."""
    value = min(float(propensity.min()), 1.0 - float(propensity.max()))
    return min(value, _PSI_CAP)


def prepare_arrays(
    outcomes,
    treatment,
    covariates,
    propensity,
    cost: float = 0.0,
    psi: float | None = None,
) -> tuple[WeightedSample, DatasetMeta, np.ndarray]:
    """Cost-adjust outcomes, fix the meta constants, compute weights.

    `propensity` may be a scalar (constant design) or a per-row vector.
    Returns the weighted sample, the meta record and the adjusted outcomes.
    """
    y = np.asarray(outcomes, dtype=np.float64)
    d = np.asarray(treatment)
    x = np.atleast_2d(np.asarray(covariates, dtype=np.float64))
    if y.ndim != 1 or y.size == 0:
        raise ValueError("outcomes must be a nonempty vector")
    if not np.isin(d, (0, 1)).all():
        raise ValueError("treatment must be binary 0/1")
    if np.any(y < 0):
        raise ValueError("raw outcomes must be non-negative (cost is applied here)")
    e = np.asarray(propensity, dtype=np.float64)
    if e.ndim == 0:
        e = np.full(y.shape, float(e))
    if np.any(e <= 0.0) or np.any(e >= 1.0):
        raise ValueError("propensity values must lie strictly inside (0, 1)")
    if cost < 0:
        raise ValueError("treatment cost cannot be negative")
    adjusted = y - cost * (d == 1)
    cap = float(adjusted.max())
    if cap <= 0.0:
        raise ValueError("no positive outcome after cost adjustment; cap undefined")
    overlap = derive_overlap(e) if psi is None else float(psi)
    maxima = x.max(axis=0)
    if np.any(maxima <= 0.0):
        raise ValueError("every covariate column needs a positive maximum")
    meta = DatasetMeta(
        n=y.shape[0],
        outcome_cap=cap,
        overlap=overlap,
        covariate_maxima=maxima,
        cost=cost,
    )
    sample = compute_weights(adjusted, d, x, e, meta)
    return sample, meta, adjusted


def ingest(path, cost: float = 0.0, propensity: float | None = None, psi: float | None = None) -> Dataset:
    """Parse a CSV file against the schema and prepare it for fitting."""
    columns = read_table(path)
    for required in REQUIRED_COLUMNS:
        if required not in columns:
            raise ValueError(f"{path}: missing required column {required!r}")
    covariate_names = tuple(
        name for name in columns if name not in REQUIRED_COLUMNS + OPTIONAL_COLUMNS
    )
    if not covariate_names:
        raise ValueError(f"{path}: no covariate columns found")
    if "propensity" in columns:
        prop = columns["propensity"]
    elif propensity is not None:
        prop = np.full(columns["outcome"].shape, float(propensity))
    else:
        raise ValueError(
            f"{path}: no propensity column; supply the constant design value via --propensity"
        )
    covariates = np.column_stack([columns[name] for name in covariate_names])
    sample, meta, adjusted = prepare_arrays(
        columns["outcome"], columns["treatment"], covariates, prop, cost=cost, psi=psi
    )
    return Dataset(
        outcomes=adjusted,
        treatment=columns["treatment"].astype(np.int8),
        covariates=covariates,
        propensity=prop,
        covariate_names=covariate_names,
        meta=meta,
        sample=sample,
    )


def _fmt(value) -> str:
    return f"{value:.17g}"


def write_dataset_csv(path, outcomes, treatment, covariates, covariate_names, propensity=None) -> None:
    """Emit a schema-conformant dataset with round-trip-exact precision."""
    outcomes = np.asarray(outcomes)
    treatment = np.asarray(treatment)
    covariates = np.atleast_2d(np.asarray(covariates))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["outcome", "treatment"]
        if propensity is not None:
            header.append("propensity")
        header.extend(covariate_names)
        writer.writerow(header)
        prop = None if propensity is None else np.broadcast_to(np.asarray(propensity, dtype=np.float64), outcomes.shape)
        for i in range(outcomes.shape[0]):
            row = [_fmt(outcomes[i]), str(int(treatment[i]))]
            if prop is not None:
                row.append(_fmt(prop[i]))
            row.extend(_fmt(v) for v in covariates[i])
            writer.writerow(row)


def _file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def manifest_digest(manifest: dict) -> str:
    payload = {k: v for k, v in manifest.items() if k != "digest"}
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def build_manifest(command: str, parameters: dict, input_path=None) -> dict:
    """Resolved-run record embedded in every artifact; no timestamps.

    Scheduling knobs (worker counts) are excluded: results are required to
    be independent of them, so equal manifests mean byte-identical outputs.
    """
    manifest = {
        "tool": "stochassign",
        "version": __version__,
        "command": command,
        "parameters": {k: parameters[k] for k in sorted(parameters)},
    }
    if input_path is not None:
        manifest["input_file"] = str(input_path)
        manifest["input_sha256"] = _file_sha256(input_path)
    manifest["digest"] = manifest_digest(manifest)
    return manifest


def write_json(path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_csv(path, columns: dict[str, np.ndarray], manifest: dict | None = None) -> None:
    """Write named columns with 17 significant digits; manifest as a comment."""
    names = list(columns)
    length = len(np.asarray(columns[names[0]]))
    with open(path, "w", newline="") as fh:
        if manifest is not None:
            fh.write(f"# manifest_digest={manifest['digest']}\n")
        writer = csv.writer(fh)
        writer.writerow(names)
        arrays = [np.asarray(columns[n]) for n in names]
        for i in range(length):
            writer.writerow([_fmt(a[i]) for a in arrays])

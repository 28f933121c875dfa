"""Dataset ingestion and synthetic generators.

CSV files hold one point per row (optionally followed by an integer label);
in memory the data matrix is transposed to ``(D, N)``.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .core import ValidationError, as_data_matrix, as_labels


class CSVFormatError(ValidationError):
    pass


def _is_number(cell: str) -> bool:
    try:
        float(cell)
    except ValueError:
        return False
    return True


def load_csv(path, has_labels: bool = False) -> tuple[np.ndarray, np.ndarray | None]:
    """Read a points-as-rows CSV into a ``(D, N)`` matrix and optional labels.

    A first row containing any non-numeric cell is treated as a header.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = [(i + 1, r) for i, r in enumerate(csv.reader(fh)) if any(c.strip() for c in r)]
    if rows and not all(_is_number(c) for c in rows[0][1]):
        rows = rows[1:]
    if len(rows) < 2:
        raise CSVFormatError(f"{path}: need at least 2 points, found {len(rows)}")

    width = len(rows[0][1])
    min_width = 2 if has_labels else 1
    if width < min_width:
        raise CSVFormatError(f"{path}: rows need at least {min_width} columns")
    values = np.empty((len(rows), width))
    for k, (line, row) in enumerate(rows):
        if len(row) != width:
            raise CSVFormatError(f"{path}: row {line} has {len(row)} columns, expected {width}")
        for j, cell in enumerate(row):
            try:
                values[k, j] = float(cell)
            except ValueError:
                raise CSVFormatError(
                    f"{path}: non-numeric value {cell!r} at row {line}, column {j + 1}"
                ) from None

    labels = None
    if has_labels:
        raw = values[:, -1]
        if not np.all(raw == np.round(raw)):
            raise CSVFormatError(f"{path}: label column must hold integers")
        labels = as_labels(raw.astype(int))
        values = values[:, :-1]
    return as_data_matrix(values.T), labels


def save_csv(path, X, labels=None, header: bool = True) -> None:
    """Write a ``(D, N)`` matrix as points-as-rows CSV at full precision."""
    X = as_data_matrix(X)
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        if header:
            names = [f"x{j}" for j in range(X.shape[0])]
            w.writerow(names + (["label"] if labels is not None else []))
        for i in range(X.shape[1]):
            row = [repr(float(v)) for v in X[:, i]]
            if labels is not None:
                row.append(str(int(labels[i])))
            w.writerow(row)


def load_labels(path) -> np.ndarray:
    """Labels from a file with one integer per line (the last CSV column if several)."""
    X = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for line, row in enumerate(csv.reader(fh), start=1):
            if not row or not row[-1].strip():
                continue
            cell = row[-1].strip()
            try:
                X.append(int(cell))
            except ValueError:
                if line == 1:
                    continue  # header
                raise CSVFormatError(f"{path}: non-integer label {cell!r} at row {line}") from None
    return as_labels(np.array(X, dtype=int))


def _shuffle(rng, X, labels):
    perm = rng.permutation(X.shape[1])
    return X[:, perm], labels[perm]


def _sizes(n, k):
    base, extra = divmod(n, k)
    return [base + (i < extra) for i in range(k)]


def gaussian_blobs(n=150, k=3, dim=2, scales=0.5, centers=None, separation=None, seed=0):
    """Isotropic Gaussian clusters.

    ``scales`` is one standard deviation for all clusters or one per cluster.
    Without explicit ``centers``, they are drawn uniformly in a box and
    rejected until every pair is at least ``separation`` apart (default: ten
    times the largest scale).
    """
    if k < 1 or n < k or dim < 1:
        raise ValidationError("gaussian blobs need k >= 1, n >= k and dim >= 1")
    rng = np.random.default_rng(seed)
    scales = np.broadcast_to(np.asarray(scales, dtype=float), (k,))
    if np.any(scales <= 0):
        raise ValidationError("scales must be positive")
    if centers is None:
        sep = 10 * scales.max() if separation is None else float(separation)
        box = sep * max(k, 2)
        centers = []
        for _ in range(10000):
            c = rng.uniform(-box / 2, box / 2, size=dim)
            if all(np.linalg.norm(c - o) >= sep for o in centers):
                centers.append(c)
                if len(centers) == k:
                    break
        if len(centers) < k:
            raise ValidationError("could not place well-separated centers")
    centers = np.asarray(centers, dtype=float)
    if centers.shape != (k, dim):
        raise ValidationError(f"centers must have shape ({k}, {dim})")
    cols, labels = [], []
    for j, m in enumerate(_sizes(n, k)):
        cols.append(centers[j][:, None] + scales[j] * rng.standard_normal((dim, m)))
        labels += [j] * m
    return _shuffle(rng, np.hstack(cols), np.array(labels))


def density_contrast_blobs(n=120, contrast=10.0, scale=0.3, separation=6.0, seed=0):
    """Two 2-D blobs whose point densities differ by ``contrast``.

    The sparse blob's standard deviation is ``sqrt(contrast)`` times the dense
    one's, so with equal counts its density per unit area is lower by the
    contrast factor.
    """
    if contrast < 1:
        raise ValidationError("contrast must be >= 1")
    return gaussian_blobs(
        n=n,
        k=2,
        dim=2,
        scales=[scale, scale * np.sqrt(contrast)],
        centers=[[0.0, 0.0], [separation, 0.0]],
        seed=seed,
    )


def union_of_subspaces(n=150, k=3, ambient_dim=30, subspace_dim=4, noise=0.0, seed=0, return_bases=False):
    """Points drawn from ``k`` random linear subspaces plus Gaussian noise."""
    if k < 1 or n < k:
        raise ValidationError("need k >= 1 and n >= k")
    if not 1 <= subspace_dim < ambient_dim:
        raise ValidationError("subspace dimension must be in [1, ambient_dim)")
    if noise < 0:
        raise ValidationError("noise must be >= 0")
    rng = np.random.default_rng(seed)
    bases, cols, labels = [], [], []
    for j, m in enumerate(_sizes(n, k)):
        B, _ = np.linalg.qr(rng.standard_normal((ambient_dim, subspace_dim)))
        bases.append(B)
        cols.append(B @ rng.standard_normal((subspace_dim, m)))
        labels += [j] * m
    X = np.hstack(cols)
    X = X + noise * rng.standard_normal(X.shape)
    X, labels = _shuffle(rng, X, np.array(labels))
    if return_bases:
        return X, labels, bases
    return X, labels


def two_moons(n=200, noise=0.05, seed=0):
    """Two interleaving half circles, ``n // 2`` points on the first moon."""
    if n < 2 or noise < 0:
        raise ValidationError("two moons need n >= 2 and noise >= 0")
    rng = np.random.default_rng(seed)
    n0 = n // 2
    n1 = n - n0
    t0 = np.linspace(0, np.pi, n0)
    t1 = np.linspace(0, np.pi, n1)
    upper = np.vstack([np.cos(t0), np.sin(t0)])
    lower = np.vstack([1 - np.cos(t1), 0.5 - np.sin(t1)])
    X = np.hstack([upper, lower]) + noise * rng.standard_normal((2, n))
    labels = np.array([0] * n0 + [1] * n1)
    return _shuffle(rng, X, labels)


GENERATORS = {
    "gaussian-blobs": gaussian_blobs,
    "density-contrast": density_contrast_blobs,
    "union-of-subspaces": union_of_subspaces,
    "two-moons": two_moons,
}


def generate_synthetic(kind: str, seed: int = 0, **params) -> tuple[np.ndarray, np.ndarray]:
    """Dispatch to a named generator; returns ``(X, labels)`` with ``X`` of shape ``(D, N)``."""
    try:
        gen = GENERATORS[kind]
    except KeyError:
        raise ValidationError(f"unknown dataset kind {kind!r}; choose from {sorted(GENERATORS)}") from None
    params.pop("return_bases", None)
    return gen(seed=seed, **params)

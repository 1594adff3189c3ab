"""Low-level linear algebra shared by the operator-algebra layers.

Conventions: operators are square complex ndarrays; flattening is always
row-major (``A.ravel()``), so the Hilbert-Schmidt inner product of two
operators is ``(A.conj().ravel() @ B.ravel())`` and the commutator map
``X -> [B, X]`` acts on flattened operators as ``kron(B, I) - kron(I, B.T)``.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatchError

__all__ = [
    "PAULI_X",
    "PAULI_Y",
    "PAULI_Z",
    "dagger",
    "hs_inner",
    "hs_norm",
    "operator_norm",
    "orthonormal_rows",
    "null_space_rows",
    "subspace_intersection",
    "cluster_indices",
    "embed_factor",
    "partial_trace",
    "spin_projections",
    "random_unitary",
]

PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
PAULI_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]], dtype=complex)
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)


def dagger(mat: np.ndarray) -> np.ndarray:
    return mat.conj().T


def hs_inner(a: np.ndarray, b: np.ndarray) -> complex:
    """Hilbert-Schmidt inner product ``trace(a* b)``, antilinear in ``a``."""
    return complex(a.conj().ravel() @ b.ravel())


def hs_norm(a: np.ndarray) -> float:
    return float(np.linalg.norm(a.ravel()))


def operator_norm(a: np.ndarray) -> float:
    """Largest singular value."""
    return float(np.linalg.norm(a, 2))


def _as_matrix(rows) -> np.ndarray:
    mat = np.asarray(rows, dtype=complex)
    if mat.ndim == 1:
        mat = mat[None, :]
    return mat


def orthonormal_rows(rows, tol: float, scale: float | None = None) -> np.ndarray:
    """Orthonormal basis of the row space of ``rows``.

    Directions with singular value at or below ``tol * max(1, scale)`` are
    discarded; ``scale`` defaults to the largest singular value.  Passing the
    floor of 1 keeps the cutoff meaningful when the whole input is noise.
    """
    mat = _as_matrix(rows)
    if mat.size == 0:
        return np.zeros((0, mat.shape[-1]), dtype=complex)
    _, svals, vh = np.linalg.svd(mat, full_matrices=False)
    if svals.size == 0:
        return np.zeros((0, mat.shape[1]), dtype=complex)
    if scale is None:
        scale = float(svals[0])
    cutoff = tol * max(1.0, scale)
    keep = svals > cutoff
    return vh[keep]


def null_space_rows(mat, tol: float) -> np.ndarray:
    """Orthonormal basis (as rows) of ``{v : mat @ v = 0}``.

    The cutoff is ``tol * max(1, largest singular value)`` so that a map
    which is itself numerically zero keeps its full domain as null space.
    """
    mat = _as_matrix(mat)
    n_cols = mat.shape[1]
    if mat.shape[0] == 0:
        return np.eye(n_cols, dtype=complex)
    # the full V* is only needed when rows < cols; otherwise the thin SVD
    # already carries every right singular vector and skips a huge U
    full = mat.shape[0] < n_cols
    _, svals, vh = np.linalg.svd(mat, full_matrices=full)
    cutoff = tol * max(1.0, float(svals[0]) if svals.size else 0.0)
    rank = int(np.sum(svals > cutoff))
    return vh[rank:].conj()


def subspace_intersection(a_rows: np.ndarray, b_rows: np.ndarray, tol: float) -> np.ndarray:
    """Orthonormal rows spanning ``span(a_rows) & span(b_rows)``.

    Both inputs must have orthonormal rows.  A combination ``c @ a_rows``
    lies in the intersection iff its residual after projecting onto
    ``span(b_rows)`` vanishes, so the coefficient vectors are the null
    space of the residual matrix.
    """
    a = _as_matrix(a_rows)
    b = _as_matrix(b_rows)
    if a.shape[0] == 0 or b.shape[0] == 0:
        return np.zeros((0, a.shape[-1] if a.size else b.shape[-1]), dtype=complex)
    if a.shape[1] != b.shape[1]:
        raise DimensionMismatchError(
            f"ambient dimensions differ: {a.shape[1]} vs {b.shape[1]}")
    resid = a - (a @ dagger(b)) @ b
    coeffs = null_space_rows(resid.T, tol)  # rows c with c @ resid = 0
    return coeffs @ a


def cluster_indices(values: np.ndarray, gap: float) -> list[np.ndarray]:
    """Group sorted positions of ``values`` into clusters separated by > ``gap``.

    ``values`` need not be sorted; each returned array holds original indices
    of one cluster, and clusters are ordered by increasing value.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        return []
    order = np.argsort(values, kind="stable")
    clusters = [[order[0]]]
    for idx in order[1:]:
        if values[idx] - values[clusters[-1][-1]] > gap:
            clusters.append([idx])
        else:
            clusters[-1].append(idx)
    return [np.asarray(c, dtype=int) for c in clusters]


def embed_factor(op: np.ndarray, support: tuple[int, ...], n_cells: int, cell_dim: int) -> np.ndarray:
    """Embed ``op`` acting on the tensor cells ``support`` into the full product.

    Cells are ordered; ``op`` must act on ``cell_dim ** len(support)``
    dimensions with its tensor slots in the order given by ``support``.
    """
    support = tuple(support)
    d = cell_dim
    if op.shape != (d ** len(support),) * 2:
        raise DimensionMismatchError(
            f"operator of shape {op.shape} does not act on {len(support)} cells of dim {d}")
    rest = [c for c in range(n_cells) if c not in support]
    full = np.kron(op, np.eye(d ** len(rest), dtype=complex))
    # full now acts on cells ordered (support..., rest...); permute into 0..n-1
    arrangement = list(support) + rest
    perm = [arrangement.index(c) for c in range(n_cells)]
    tensor = full.reshape([d] * (2 * n_cells))
    tensor = tensor.transpose(perm + [n_cells + p for p in perm])
    return np.ascontiguousarray(tensor.reshape(d ** n_cells, d ** n_cells))


def partial_trace(mat: np.ndarray, keep: tuple[int, ...], n_cells: int, cell_dim: int) -> np.ndarray:
    """Trace out every tensor cell not listed in ``keep`` (result slots follow ``keep``)."""
    keep = tuple(keep)
    d = cell_dim
    tensor = mat.reshape([d] * (2 * n_cells))
    letters = "abcdefghijklmnopqrstuvwxyz"
    if 2 * n_cells > len(letters):
        raise DimensionMismatchError("too many tensor cells for einsum labels")
    row = list(letters[:n_cells])
    col = list(letters[n_cells:2 * n_cells])
    for c in range(n_cells):
        if c not in keep:
            col[c] = row[c]
    out = "".join(row[c] for c in keep) + "".join(col[c] for c in keep)
    reduced = np.einsum("".join(row) + "".join(col) + "->" + out, tensor)
    dim = d ** len(keep)
    return np.ascontiguousarray(reduced.reshape(dim, dim))


def spin_projections(direction) -> tuple[np.ndarray, np.ndarray]:
    """Projections onto the +1 and -1 eigenspaces of ``n . sigma`` for a unit vector n."""
    n = np.asarray(direction, dtype=float)
    if n.shape != (3,):
        raise DimensionMismatchError("direction must be a 3-vector")
    norm = np.linalg.norm(n)
    if norm == 0:
        raise ValueError("direction must be nonzero")
    n = n / norm
    sigma = n[0] * PAULI_X + n[1] * PAULI_Y + n[2] * PAULI_Z
    eye = np.eye(2, dtype=complex)
    return 0.5 * (eye + sigma), 0.5 * (eye - sigma)


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-ish random unitary via QR of a complex Gaussian matrix."""
    z = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    q, r = np.linalg.qr(z)
    # fix the phase convention so the factorization is unique
    q = q * (np.diagonal(r) / np.abs(np.diagonal(r)))
    return q

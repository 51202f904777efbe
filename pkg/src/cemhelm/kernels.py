"""Low-level numerical primitives.

Sparse complex matrices are plain scipy CSR/CSC matrices; this module adds
the two operations the rest of the package relies on: a reusable direct
factorization for (complex symmetric, indefinite) sparse systems, and a
dense generalized symmetric eigensolver for the small local problems.
"""

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import DimensionMismatch, NotPositiveDefinite, SingularMatrix

__all__ = ["Factorization", "factorize", "solve", "generalized_sym_eig", "submatrix"]


class Factorization:
    """Opaque LU handle tied to one sparse matrix; reusable for many rhs."""

    def __init__(self, lu, shape, dtype):
        self._lu = lu
        self.shape = shape
        self.dtype = dtype

    def solve(self, b):
        b = np.asarray(b)
        if b.shape[0] != self.shape[0]:
            raise DimensionMismatch(
                f"rhs has {b.shape[0]} rows, matrix is {self.shape[0]}x{self.shape[1]}"
            )
        x = self._lu.solve(b.astype(self.dtype, copy=False))
        if not np.all(np.isfinite(x)):
            raise SingularMatrix("solve produced non-finite entries")
        return x


def factorize(A):
    """LU-factorize a square sparse matrix for repeated direct solves."""
    if A.shape[0] != A.shape[1]:
        raise DimensionMismatch(f"matrix is not square: {A.shape}")
    try:
        lu = spla.splu(sp.csc_matrix(A))
    except RuntimeError as exc:  # SuperLU signals exact singularity this way
        raise SingularMatrix(str(exc)) from exc
    return Factorization(lu, A.shape, A.dtype)


def solve(fact, b):
    return fact.solve(b)


def generalized_sym_eig(K, S, count):
    """First `count` eigenpairs of K v = lambda S v, S-orthonormal, ascending.

    K symmetric, S symmetric positive definite; both dense (or convertible).
    Solved by full dense decomposition: the local problems are small and a
    full solve is deterministic and robust.
    """
    K = np.asarray(K.toarray() if sp.issparse(K) else K, dtype=float)
    S = np.asarray(S.toarray() if sp.issparse(S) else S, dtype=float)
    if K.shape != S.shape or K.shape[0] != K.shape[1]:
        raise DimensionMismatch(f"incompatible shapes {K.shape} vs {S.shape}")
    if count > K.shape[0]:
        raise DimensionMismatch(
            f"requested {count} pairs from a {K.shape[0]}-dimensional problem"
        )
    try:
        values, vectors = sla.eigh(K, S)
    except sla.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from exc
    return values[:count], vectors[:, :count]


def submatrix(A, indices):
    """Rows and columns of a sparse matrix at `indices`, in the given order."""
    return sp.csr_matrix(A)[indices][:, indices]

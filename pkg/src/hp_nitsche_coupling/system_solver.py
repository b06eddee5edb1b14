"""
Global block system of the coupled problem and its direct solution.

Unknowns are ordered (U1_O, U1_I, U2_I, U2_O): outer and interface FE DOFs,
then interface and outer BE trace DOFs.
"""

from __future__ import annotations

import io
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy.linalg import (
    LinAlgError,
    cho_factor,
    cho_solve,
    eigvalsh_tridiagonal,
    ldl,
    solve_banded,
    solve_triangular,
)
from scipy.sparse import csr_matrix, issparse

try:
    from hp_nitsche_coupling.models import ConsistencyError, SolverError
except ImportError:
    from .models import ConsistencyError, SolverError

# Configure logging
logger = logging.getLogger(__name__)

RESIDUAL_TOLERANCE = 1e-10
SYMMETRY_TOLERANCE = 1e-12

MatrixLike = Union[np.ndarray, csr_matrix]


@dataclass(frozen=True, eq=False)
class BlockSystem:
    """
    Dense symmetric matrix A + B + C with right-hand side.

    n_fe_outer, n_fe_interface, n_be_interface and n_be_outer are the sizes
    of the four index blocks in order.
    """

    matrix: np.ndarray
    rhs: np.ndarray
    n_fe_outer: int
    n_fe_interface: int
    n_be_interface: int
    n_be_outer: int

    @property
    def n_fe(self) -> int:
        return self.n_fe_outer + self.n_fe_interface

    @property
    def n_be(self) -> int:
        return self.n_be_interface + self.n_be_outer

    @property
    def size(self) -> int:
        return self.n_fe + self.n_be

    def block(self, row: str, col: str) -> np.ndarray:
        """Sub-block by names 'fe_outer', 'fe_interface', 'be_interface', 'be_outer'."""
        bounds = np.cumsum(
            [0, self.n_fe_outer, self.n_fe_interface, self.n_be_interface, self.n_be_outer]
        )
        names = ("fe_outer", "fe_interface", "be_interface", "be_outer")
        i, j = names.index(row), names.index(col)
        return self.matrix[bounds[i] : bounds[i + 1], bounds[j] : bounds[j + 1]]

    def symmetry_defect(self) -> float:
        scale = max(float(np.abs(self.matrix).max()), 1.0)
        return float(np.abs(self.matrix - self.matrix.T).max()) / scale


@dataclass(frozen=True)
class Solution:
    """Coefficient vectors of the discrete solution"""

    fe: np.ndarray
    be: np.ndarray
    factorization: str = "cholesky"
    residual: float = 0.0

    @property
    def vector(self) -> np.ndarray:
        return np.concatenate((self.fe, self.be))


def _dense(block: MatrixLike) -> np.ndarray:
    return block.toarray() if issparse(block) else np.asarray(block, dtype=float)


def assemble_global(
    stiffness: MatrixLike,
    steklov: np.ndarray,
    coupling: MatrixLike,
    fe_load: np.ndarray,
    be_load: np.ndarray,
    n_fe_outer: Optional[int] = None,
    n_be_interface: Optional[int] = None,
) -> BlockSystem:
    """
    Add the block-diagonal part diag(A, S_hat) to the coupling blocks B + C.

    Args:
        stiffness: FE stiffness matrix A
        steklov: Discrete Steklov-Poincare matrix S_hat
        coupling: Sum of flux and penalty blocks on the full index set
        fe_load: FE right-hand side
        be_load: BE right-hand side
        n_fe_outer: Number of outer FE DOFs (default: all FE DOFs)
        n_be_interface: Number of interface BE DOFs (default: all BE DOFs)

    Raises:
        ConsistencyError: If block dimensions do not match
    """
    A = _dense(stiffness)
    S = _dense(steklov)
    BC = _dense(coupling)
    n_fe, n_be = A.shape[0], S.shape[0]
    n = n_fe + n_be
    if A.shape != (n_fe, n_fe) or S.shape != (n_be, n_be):
        raise ConsistencyError(f"Diagonal blocks must be square, got {A.shape} and {S.shape}")
    if BC.shape != (n, n):
        raise ConsistencyError(f"Coupling block has shape {BC.shape}, expected {(n, n)}")
    fe_load = np.asarray(fe_load, dtype=float)
    be_load = np.asarray(be_load, dtype=float)
    if fe_load.shape != (n_fe,) or be_load.shape != (n_be,):
        raise ConsistencyError(
            f"Loads of length {fe_load.shape} and {be_load.shape} do not match {n_fe} + {n_be} DOFs"
        )
    n_fe_outer = n_fe if n_fe_outer is None else n_fe_outer
    n_be_interface = n_be if n_be_interface is None else n_be_interface
    if not (0 <= n_fe_outer <= n_fe and 0 <= n_be_interface <= n_be):
        raise ConsistencyError("Index partition does not fit the block sizes")

    matrix = BC.copy()
    matrix[:n_fe, :n_fe] += A
    matrix[n_fe:, n_fe:] += S
    system = BlockSystem(
        matrix=matrix,
        rhs=np.concatenate((fe_load, be_load)),
        n_fe_outer=n_fe_outer,
        n_fe_interface=n_fe - n_fe_outer,
        n_be_interface=n_be_interface,
        n_be_outer=n_be - n_be_interface,
    )
    defect = system.symmetry_defect()
    if defect > SYMMETRY_TOLERANCE:
        logger.warning("Global matrix is not symmetric: relative defect %.3e", defect)
    logger.debug("Assembled global system: %d FE + %d BE DOFs", n_fe, n_be)
    return system


class _LdlSolver:
    """Bunch-Kaufman LDL^T factors with a solve method"""

    def __init__(self, matrix: np.ndarray):
        lu, d, perm = ldl(matrix, lower=True)
        self.lower = lu[perm]
        self.perm = perm
        diag = np.diag(d).copy()
        off = np.diag(d, -1).copy()
        self.banded = np.zeros((3, len(diag)))
        self.banded[0, 1:] = off
        self.banded[1] = diag
        self.banded[2, :-1] = off
        pivots = eigvalsh_tridiagonal(diag, off) if len(diag) > 1 else diag
        self.smallest_pivot = float(np.abs(pivots).min()) if len(pivots) else 0.0
        self.largest_pivot = float(np.abs(pivots).max()) if len(pivots) else 0.0

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        w = solve_triangular(self.lower, rhs[self.perm], lower=True, unit_diagonal=True)
        z = solve_banded((1, 1), self.banded, w)
        y = solve_triangular(self.lower.T, z, lower=False, unit_diagonal=True)
        x = np.empty_like(y)
        x[self.perm] = y
        return x


def _relative_residual(matrix: np.ndarray, x: np.ndarray, rhs: np.ndarray) -> float:
    norm_b = float(np.linalg.norm(rhs))
    r = float(np.linalg.norm(matrix @ x - rhs))
    return r / norm_b if norm_b > 0.0 else r


def solve(system: BlockSystem) -> Solution:
    """
    Solve the global system by Cholesky, falling back to LDL^T.

    One step of iterative refinement follows the factorization.

    Raises:
        SolverError: If the matrix is numerically singular
    """
    A, b = system.matrix, system.rhs
    if system.size == 0:
        raise SolverError("Global system has no unknowns", smallest_pivot=0.0)
    if not np.any(b):
        return Solution(np.zeros(system.n_fe), np.zeros(system.n_be), "cholesky", 0.0)
    try:
        factor = cho_factor(A, lower=True, check_finite=True)
        method = "cholesky"

        def apply(rhs):
            return cho_solve(factor, rhs)

    except LinAlgError:
        logger.warning("Global matrix is not positive definite; falling back to LDL^T")
        ldl_solver = _LdlSolver(A)
        eps = np.finfo(float).eps
        if ldl_solver.smallest_pivot <= system.size * eps * max(ldl_solver.largest_pivot, 1.0):
            raise SolverError("Global matrix is singular", ldl_solver.smallest_pivot)
        method = "ldl"
        apply = ldl_solver.solve

    x = apply(b)
    x = x + apply(b - A @ x)
    if not np.all(np.isfinite(x)):
        raise SolverError("Solution has non-finite entries", smallest_pivot=0.0)
    residual = _relative_residual(A, x, b)
    if residual > RESIDUAL_TOLERANCE:
        logger.warning("Relative residual %.3e exceeds %.0e", residual, RESIDUAL_TOLERANCE)
    logger.debug("Solved %d unknowns by %s, relative residual %.3e", system.size, method, residual)
    return Solution(x[: system.n_fe], x[system.n_fe :], method, residual)


def galerkin_residual(system: BlockSystem, solution: Solution) -> float:
    """max |A U - l| / max |l|; the plain max norm when l = 0."""
    r = float(np.abs(system.matrix @ solution.vector - system.rhs).max(initial=0.0))
    scale = float(np.abs(system.rhs).max(initial=0.0))
    return r / scale if scale > 0.0 else r


def dump_dense(matrix: MatrixLike) -> str:
    """Dense plain-text rendering: a header line with the shape, then one row per line."""
    dense = np.atleast_2d(_dense(matrix))
    buffer = io.StringIO()
    buffer.write(f"{dense.shape[0]} {dense.shape[1]}\n")
    np.savetxt(buffer, dense, fmt="%.17e")
    return buffer.getvalue()


def dump_system(system: BlockSystem, directory: Union[str, Path]) -> Path:
    """Write matrix.txt and rhs.txt into directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    (directory / "matrix.txt").write_text(dump_dense(system.matrix))
    (directory / "rhs.txt").write_text(dump_dense(system.rhs[:, None]))
    logger.info("Wrote global system (%d unknowns) to %s", system.size, directory)
    return directory

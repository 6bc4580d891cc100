"""Row-wise Nystrom solver for the Krein convolution equation

    R(x, t) + H(x - t) + int_0^x R(x, s) H(s - t) ds = 0,  0 <= t <= x <= 1,

plus the potential map tau(x) = -R(x, 0) and the triangular kernels that
express the boundary-value solutions as perturbations of sine and cosine.

For each grid row x_i the trapezoid rule on [0, x_i] turns the equation
into one dense linear solve of size r (i+1); the system matrix is block
Toeplitz up to its weight pattern because the kernel depends on s - t
only.  Rows are independent.  Solvability of every row is exactly the
defining property of an accelerant, so a numerically singular row aborts
the solve and names the failing truncation point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack, lu_factor, lu_solve

from .core import (
    GridSpec,
    MatrixGrid,
    NotAnAccelerantError,
    TriangularKernel,
    ValidationError,
    block_flatten,
)

PIVOT_TOL = 1e-10


@dataclass
class KreinSolution:
    """Solution kernel with its defect and conditioning diagnostics.

    `residual` is the maximum blockwise defect of the discrete equation
    over the triangle; `min_pivot` the smallest reciprocal condition
    estimate seen across the row solves (a normalized smallest singular
    value).  tau extracted from the first column agrees with the
    alternative form H(x) + int_0^x R(x, s) H(s) ds by construction of the
    row systems.
    """

    R: TriangularKernel
    residual: float
    min_pivot: float

    def extract_tau(self, hermitize: bool) -> tuple[MatrixGrid, float]:
        """Potential tau(x_i) = -R(x_i, 0); optionally Hermitized.

        Returns the grid and the pre-symmetrization Hermiticity defect
        (NaN when no symmetrization was requested).
        """
        raw = -self.R.values[:, 0]
        if not hermitize:
            return MatrixGrid(self.R.r, self.R.spec, raw), float("nan")
        sym = (raw + np.conj(np.swapaxes(raw, -1, -2))) / 2.0
        defect = float(np.max(np.linalg.norm(raw - sym, ord=2, axis=(-2, -1))))
        return MatrixGrid(self.R.r, self.R.spec, sym, hermitian=True), defect


def _row_weights(i: int, h: float) -> np.ndarray:
    """Trapezoid weights on [0, x_i]; the zero-length row 0 gets weight 0."""
    if i == 0:
        return np.zeros(1)
    w = np.full(i + 1, h)
    w[0] = w[-1] = h / 2.0
    return w


def _toeplitz_blocks(h_values: np.ndarray) -> np.ndarray:
    """T[d] = H(d h)^T for d = 0..m (plain transpose, evenness for d < 0)."""
    return np.swapaxes(h_values, -1, -2).copy()


def solve_krein(H: MatrixGrid, spec: GridSpec | None = None) -> KreinSolution:
    """Solve the convolution equation for R on the triangle.

    H holds the kernel samples on [0, 1]; the even extension is applied
    when differences go negative (on the uniform grid all differences land
    on nodes, so no interpolation enters).  Each row solve transposes the
    unknown block row into a standard left-hand system with r right-hand
    columns; an estimated reciprocal condition number below 1e-10 raises
    NotAnAccelerantError carrying the failing x_i.
    """
    if spec is not None and spec != H.spec:
        raise ValidationError("explicit grid disagrees with the kernel grid")
    spec = H.spec
    m, r, h = spec.m, H.r, spec.h
    T = _toeplitz_blocks(H.values)
    real_path = bool(np.isrealobj(H.values)) or not np.any(H.values.imag)
    dtype = float if real_path else complex
    Td = T.real.astype(float) if real_path else T

    n_full = m + 1
    d_idx = np.abs(np.arange(n_full)[:, None] - np.arange(n_full)[None, :])
    big = block_flatten(Td[d_idx])  # (n r, n r), entry (j,k) block = H((j-k)h)^T
    rhs_rows = Td[d_idx]  # rhs for row i is column stack of H((i-j)h)^T over j

    gecon = lapack.dgecon if real_path else lapack.zgecon

    values = np.zeros((n_full, n_full, r, r), dtype=complex)
    values[0, 0] = -H.values[0]
    min_pivot = 1.0
    for i in range(1, n_full):
        n = i + 1
        a = big[: n * r, : n * r].copy()
        w = _row_weights(i, h)
        wcol = np.repeat(w, r)
        a *= wcol[None, :]
        a[np.arange(n * r), np.arange(n * r)] += 1.0
        b = -rhs_rows[i, :n].reshape(n * r, r)
        anorm = float(np.max(np.abs(a).sum(axis=0)))
        lu, piv = lu_factor(a, check_finite=False)
        rcond = gecon(lu, anorm, norm="1")[0]
        if not np.isfinite(rcond) or rcond < PIVOT_TOL:
            raise NotAnAccelerantError(
                f"kernel fails invertibility at truncation x = {i * h:.9g} "
                f"(normalized pivot {rcond:.3e}); not an accelerant",
                x=i * h,
                pivot=float(rcond),
            )
        min_pivot = min(min_pivot, float(rcond))
        y = lu_solve((lu, piv), b, check_finite=False)
        values[i, :n] = np.swapaxes(y.reshape(n, r, r), -1, -2)
    R = TriangularKernel(r, spec, values)
    return KreinSolution(R=R, residual=krein_residual(H, R), min_pivot=min_pivot)


def krein_residual(H: MatrixGrid, R: TriangularKernel) -> float:
    """Max blockwise defect of the discrete equation over the triangle.

    Recomputed from scratch with the same quadrature as the solver, so an
    exact discrete solution scores at roundoff level.
    """
    if H.spec != R.spec or H.r != R.r:
        raise ValidationError("kernel shapes disagree")
    m, r, h = H.spec.m, H.r, H.spec.h
    n_full = m + 1
    d_idx = np.abs(np.arange(n_full)[:, None] - np.arange(n_full)[None, :])
    hv = H.values[d_idx]  # (j, k) block = H((j-k)h)
    worst = 0.0
    for i in range(n_full):
        n = i + 1
        w = _row_weights(i, h)
        # defect_j = R(x_i,t_j) + H(x_i - t_j) + sum_k w_k R(x_i,s_k) H(s_k - t_j)
        quad = np.einsum("k,kab,kjbc->jac", w, R.values[i, :n], hv[:n, :n])
        defect = R.values[i, :n] + hv[i, :n] + quad
        worst = max(worst, float(np.max(np.linalg.norm(defect, ord=2, axis=(-2, -1)))))
    return worst


def theta(H: MatrixGrid, spec: GridSpec | None = None) -> MatrixGrid:
    """Potential of an accelerant: tau(x_i) = -R(x_i, 0).

    Hermitian kernels produce (up to roundoff) Hermitian potentials; the
    output is symmetrized in that case.  Use solve_krein directly when the
    conditioning diagnostics or the symmetrization defect are needed.
    """
    sol = solve_krein(H, spec)
    tau, _ = sol.extract_tau(hermitize=H.hermitian)
    return tau


def transformation_kernels(R: TriangularKernel) -> tuple[TriangularKernel, TriangularKernel]:
    """Triangular kernels expressing phi/psi as sine/cosine perturbations.

    K_D(x, t) = [R(x, (x+t)/2) - R(x, (x-t)/2)] / 2 and
    K_N(x, t) = [R(x, (x+t)/2) + R(x, (x-t)/2)] / 2 on the triangle; the
    midpoint arguments are half-grid points, evaluated by linear
    interpolation of R in its second argument.
    """
    m, r = R.spec.m, R.r
    kd = np.zeros_like(R.values)
    kn = np.zeros_like(R.values)
    for i in range(m + 1):
        row = R.values[i, : i + 1]
        half = np.empty((2 * i + 1, r, r), dtype=complex)
        half[::2] = row
        if i:
            half[1::2] = (row[:-1] + row[1:]) / 2.0
        j = np.arange(i + 1)
        plus = half[i + j]
        minus = half[i - j]
        kd[i, : i + 1] = (plus - minus) / 2.0
        kn[i, : i + 1] = (plus + minus) / 2.0
    return (TriangularKernel(r, R.spec, kd), TriangularKernel(r, R.spec, kn))

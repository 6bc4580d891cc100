"""Shared domain types, uniform grids, quadrature, and JSON file I/O.

Everything here is immutable after construction: constructors validate,
copy, and freeze their array arguments, so instances are safe to share
between threads.  All heavier operations live in the sibling modules and
are pure functions of these types.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

# Tolerances used by every constructor that checks matrix structure.
HERMITIAN_RTOL = 1e-12
PSD_RTOL = 1e-10


class KreinslError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(KreinslError):
    """A data file could not be parsed; message carries line/field position."""


class ValidationError(KreinslError):
    """Input violates a documented invariant; message names the offender."""


class ConfigurationError(KreinslError):
    """A run parameter is out of its documented range."""


class PoleProximityError(KreinslError):
    """The Weyl function was requested too close to one of its poles."""

    def __init__(self, msg: str, sigma_min: float):
        super().__init__(msg)
        self.sigma_min = sigma_min


class ContourError(KreinslError):
    """A residue-extraction contour passed too close to a pole."""


class ExtractionError(KreinslError):
    """A norming-constant candidate failed its positivity check."""


class ConsistencyError(KreinslError):
    """Internal rank bookkeeping failed, signalling a missed eigenvalue."""


class CoverageError(KreinslError):
    """Spectral data does not reach the requested truncation level."""


class NotAnAccelerantError(KreinslError):
    """The convolution kernel fails invertibility at some truncation point."""

    def __init__(self, msg: str, x: float, pivot: float):
        super().__init__(msg)
        self.x = x
        self.pivot = pivot


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a)
    out.flags.writeable = False
    return out


def _herm_defect(a: np.ndarray) -> float:
    """Max over grid of ||A - A*|| relative to 1 + ||A||."""
    d = np.linalg.norm(a - np.conj(np.swapaxes(a, -1, -2)), ord=2, axis=(-2, -1))
    s = np.linalg.norm(a, ord=2, axis=(-2, -1))
    return float(np.max(d / (1.0 + s)))


@dataclass
class GridSpec:
    """Uniform grid on [0, 1] with m subintervals and nodes x_i = i/m."""

    m: int

    def __post_init__(self):
        if not isinstance(self.m, (int, np.integer)) or self.m < 8:
            raise ValidationError(f"grid needs an integer m >= 8, got {self.m!r}")
        self.m = int(self.m)

    @property
    def h(self) -> float:
        return 1.0 / self.m

    def points(self) -> np.ndarray:
        return np.arange(self.m + 1) / self.m

    def __eq__(self, other):
        return isinstance(other, GridSpec) and other.m == self.m


def trapezoid_weights(spec: GridSpec) -> np.ndarray:
    """Composite trapezoid weights on [0, 1]; w_0 = w_m = h/2, else h."""
    w = np.full(spec.m + 1, spec.h)
    w[0] = w[-1] = spec.h / 2.0
    return w


def resample_matrix_grid(grid: MatrixGrid, spec: GridSpec) -> MatrixGrid:
    """Resample onto another uniform grid via the piecewise-linear model."""
    if spec == grid.spec:
        return grid
    pos = np.arange(spec.m + 1) * (grid.spec.m / spec.m)
    lo = np.minimum(pos.astype(int), grid.spec.m - 1)
    frac = (pos - lo)[:, None, None]
    vals = (1.0 - frac) * grid.values[lo] + frac * grid.values[lo + 1]
    return MatrixGrid(grid.r, spec, vals, hermitian=grid.hermitian)


def bin_index(lam: float) -> int:
    """Frequency bin of a positive lambda.

    Bin 1 is (0, 3*pi/2]; bin n > 1 is (pi*n - pi/2, pi*n + pi/2].  A value
    sitting on a bin boundary belongs to the lower bin; values within a
    relative 1e-9 of a boundary are snapped onto it first, so that
    floating-point representations of exact boundary points bin
    deterministically.
    """
    if lam <= 0:
        raise ValidationError(f"bin_index needs lambda > 0, got {lam}")
    u = lam / np.pi - 0.5
    nearest = round(u)
    if abs(u - nearest) <= 1e-9 * max(1.0, abs(u)):
        u = float(nearest)
    return max(1, int(np.ceil(u)))


@dataclass
class MatrixGrid:
    """An r x r complex matrix function sampled at the nodes of `spec`.

    Samples are interpreted as continuous and piecewise linear between
    nodes.  When `hermitian` is set the constructor verifies that every
    sample is Hermitian within HERMITIAN_RTOL.
    """

    r: int
    spec: GridSpec
    values: np.ndarray
    hermitian: bool = False

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        want = (self.spec.m + 1, self.r, self.r)
        if v.shape != want:
            raise ValidationError(f"matrix grid values have shape {v.shape}, expected {want}")
        if self.hermitian:
            defect = _herm_defect(v)
            if defect > HERMITIAN_RTOL:
                raise ValidationError(
                    f"grid flagged hermitian but worst sample defect is {defect:.3e}"
                )
        self.values = _frozen(v)

    def conj_transpose(self) -> "MatrixGrid":
        return MatrixGrid(self.r, self.spec, np.conj(np.swapaxes(self.values, -1, -2)),
                          hermitian=self.hermitian)

    def __neg__(self) -> "MatrixGrid":
        return MatrixGrid(self.r, self.spec, -self.values, hermitian=self.hermitian)


@dataclass
class TriangularKernel:
    """Kernel K(x, t) on the triangle 0 <= t <= x <= 1, sampled blockwise.

    values[i, j] ~ K(x_i, t_j) for j <= i; entries above the diagonal are
    stored as zero and stand for the implicit extension by zero.
    """

    r: int
    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        n = self.spec.m + 1
        want = (n, n, self.r, self.r)
        if v.shape != want:
            raise ValidationError(f"triangular kernel has shape {v.shape}, expected {want}")
        iu = np.triu_indices(n, k=1)
        if np.any(v[iu] != 0):
            v = v.copy()
            v[iu] = 0.0
        self.values = _frozen(v)


@dataclass
class SquareKernel:
    """Kernel K(x, t) sampled on the full grid square [0, 1]^2."""

    r: int
    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=complex)
        n = self.spec.m + 1
        want = (n, n, self.r, self.r)
        if v.shape != want:
            raise ValidationError(f"square kernel has shape {v.shape}, expected {want}")
        self.values = _frozen(v)


def _check_alpha(alpha: np.ndarray, idx: int) -> None:
    nrm = np.linalg.norm(alpha, 2)
    if nrm == 0.0:
        raise ValidationError(f"zero norming matrix at index {idx}")
    if np.linalg.norm(alpha - alpha.conj().T, 2) > HERMITIAN_RTOL * (1.0 + nrm):
        raise ValidationError(f"non-Hermitian norming matrix at index {idx}")
    eigmin = float(np.min(np.linalg.eigvalsh((alpha + alpha.conj().T) / 2.0)))
    if eigmin < -PSD_RTOL * nrm:
        raise ValidationError(
            f"norming matrix at index {idx} is not positive semidefinite "
            f"(eigenvalue {eigmin:.3e})"
        )


@dataclass
class SpectralData:
    """Finite sequence of (lambda_j, alpha_j) pairs, sorted by lambda.

    `includes_zero` marks a dataset whose first entry is the (0, alpha_0)
    pair of a half-bound-state problem (alpha_0 positive definite); without
    it the data describes the reduced problem that starts at lambda_1 > 0.
    """

    r: int
    lambdas: np.ndarray
    alphas: np.ndarray
    includes_zero: bool

    def __post_init__(self):
        lam = np.asarray(self.lambdas, dtype=float)
        al = np.asarray(self.alphas, dtype=complex)
        if lam.ndim != 1 or al.shape != (lam.size, self.r, self.r):
            raise ValidationError(
                f"spectral data shapes disagree: {lam.shape} lambdas vs {al.shape} alphas"
            )
        if lam.size == 0:
            raise ValidationError("spectral data needs at least one entry")
        if lam[0] < 0:
            raise ValidationError("negative lambda at index 0")
        for j in range(1, lam.size):
            if lam[j] <= lam[j - 1]:
                raise ValidationError(f"non-increasing lambda at index {j}")
        for j in range(lam.size):
            _check_alpha(al[j], j)
        if self.includes_zero:
            if lam[0] != 0.0:
                raise ValidationError("dataset flagged includes_zero but lambda_0 != 0")
            a0 = (al[0] + al[0].conj().T) / 2.0
            if float(np.min(np.linalg.eigvalsh(a0))) <= 0.0:
                raise ValidationError("alpha_0 must be positive definite when lambda_0 = 0")
        elif lam[0] == 0.0:
            raise ValidationError("lambda_0 = 0 requires includes_zero")
        self.lambdas = _frozen(lam)
        self.alphas = _frozen(al)

    def __len__(self) -> int:
        return self.lambdas.size


@dataclass
class BoundaryValues:
    """The four boundary matrices of the fundamental system at one lambda.

    phi_tau, psi_tau are the Dirichlet/Neumann-type solutions for the
    potential tau at x = 1, phi_mtau and psi_mtau the same for -tau.
    `identity_residual` reports how far the inverse-pair identity between
    the fundamental matrix and its adjoint counterpart is from holding.
    """

    lam: complex
    phi_tau: np.ndarray
    psi_tau: np.ndarray
    phi_mtau: np.ndarray
    psi_mtau: np.ndarray
    identity_residual: float = field(default=float("nan"))

    def __post_init__(self):
        for name in ("phi_tau", "psi_tau", "phi_mtau", "psi_mtau"):
            setattr(self, name, _frozen(np.asarray(getattr(self, name), dtype=complex)))


def g2_norm(kernel: TriangularKernel) -> float:
    """Mixed slice norm: max over rows/columns of the L2 norm of a slice.

    Row and column slices are integrated over [0, 1] with trapezoid
    weights, the implicit zero extension above the diagonal included; the
    matrix norm is spectral.
    """
    w = trapezoid_weights(kernel.spec)
    sq = np.linalg.norm(kernel.values, ord=2, axis=(-2, -1)) ** 2
    rows = np.sqrt(sq @ w)
    cols = np.sqrt(w @ sq)
    return float(max(rows.max(), cols.max()))


def block_flatten(blocks: np.ndarray) -> np.ndarray:
    """(n, n, r, r) block array -> (n*r, n*r) matrix."""
    n, _, r, _ = blocks.shape
    return blocks.transpose(0, 2, 1, 3).reshape(n * r, n * r)


def sym_nystrom_square(kernel: SquareKernel) -> np.ndarray:
    """Symmetrized Nystrom matrix W^(1/2) K W^(1/2) of a square kernel.

    Eigenvalues of I + (this matrix) approximate the spectrum of the
    identity plus the integral operator with kernel K on L2(0,1).
    """
    w = trapezoid_weights(kernel.spec)
    s = np.sqrt(w)
    scaled = kernel.values * s[:, None, None, None] * s[None, :, None, None]
    return block_flatten(scaled)


def sym_nystrom_triangular(kernel: TriangularKernel) -> np.ndarray:
    """Similarity-symmetrized Nystrom matrix of a Volterra-type kernel.

    The kernel extended by zero above the diagonal jumps across t = x, and
    the diagonal samples sit exactly on that jump; they enter with half
    weight, the canonical mean-value regularization of a jump kernel.  For
    interior rows this coincides with the trapezoid endpoint weight of the
    row integral over [0, x_i], and it keeps products of such matrices
    consistent with the operator algebra to quadrature order at the two
    corners as well.
    """
    n = kernel.spec.m + 1
    w = trapezoid_weights(kernel.spec)
    s = np.sqrt(w)
    ratio = np.tril(np.ones((n, n)))
    idx = np.arange(n)
    ratio[idx, idx] = 0.5
    scaled = kernel.values * (ratio * np.outer(s, s))[:, :, None, None]
    return block_flatten(scaled)


# ---------------------------------------------------------------------------
# File I/O.  Complex numbers are stored as two-element [re, im] arrays; the
# float repr round-trips, so save followed by load is bit exact.

def _matrix_to_json(mat: np.ndarray) -> list:
    return [[[float(z.real), float(z.imag)] for z in row] for row in mat]


def _matrix_from_json(obj, r: int, where: str) -> np.ndarray:
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{where}: malformed complex matrix ({exc})") from None
    if arr.shape != (r, r, 2):
        raise ParseError(f"{where}: matrix has shape {arr.shape[:-1]}, expected ({r}, {r})")
    return arr[..., 0] + 1j * arr[..., 1]


def _load_json(path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def _need(obj: dict, key: str, path) -> object:
    if key not in obj:
        raise ParseError(f"{path}: missing field {key!r}")
    return obj[key]


def save_matrix_grid(grid: MatrixGrid, path, extra: dict | None = None) -> None:
    doc = {
        "r": grid.r,
        "m": grid.spec.m,
        "hermitian": bool(grid.hermitian),
        "values": [_matrix_to_json(v) for v in grid.values],
    }
    if extra:
        doc.update(extra)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_matrix_grid(path) -> MatrixGrid:
    doc = _load_json(path)
    r = _need(doc, "r", path)
    m = _need(doc, "m", path)
    values = _need(doc, "values", path)
    if not isinstance(values, list) or len(values) != m + 1:
        raise ParseError(f"{path}: expected {m + 1} matrices in 'values'")
    mats = np.stack([
        _matrix_from_json(v, r, f"{path}: values[{i}]") for i, v in enumerate(values)
    ])
    return MatrixGrid(r, GridSpec(m), mats, hermitian=bool(_need(doc, "hermitian", path)))


def save_spectral_data(data: SpectralData, path) -> None:
    doc = {
        "r": data.r,
        "includes_zero": bool(data.includes_zero),
        "entries": [
            {"lambda": float(lam), "alpha": _matrix_to_json(al)}
            for lam, al in zip(data.lambdas, data.alphas)
        ],
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh)
        fh.write("\n")


def load_spectral_data(path) -> SpectralData:
    doc = _load_json(path)
    r = _need(doc, "r", path)
    entries = _need(doc, "entries", path)
    if not isinstance(entries, list):
        raise ParseError(f"{path}: 'entries' must be a list")
    lams, alphas = [], []
    for i, ent in enumerate(entries):
        if not isinstance(ent, dict):
            raise ParseError(f"{path}: entries[{i}] is not an object")
        lams.append(float(_need(ent, "lambda", f"{path}: entries[{i}]")))
        alphas.append(_matrix_from_json(_need(ent, "alpha", f"{path}: entries[{i}]"),
                                        r, f"{path}: entries[{i}].alpha"))
    return SpectralData(r, np.asarray(lams), np.stack(alphas),
                        includes_zero=bool(_need(doc, "includes_zero", path)))

"""Dense Hermitian operator algebra on bipartite product spaces.

Everything acts on C^{d1} (x) C^{d2} in the computational product basis
|i>|j| with the second index fastest, i.e. row = i*d2 + j.  This single
convention is shared by all constructors and by the partial transpose.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

# Hermiticity assertion, one order tighter than solver accuracy.
TAU_HERM = 1e-10
# Positive-semidefiniteness verdicts, one order looser than solver accuracy.
TAU_PSD = 1e-8
# Eigendecomposition reconstruction residual.
TAU_EIG = 1e-10


class ValidationError(ValueError):
    """An operator, ensemble, measurement, or file violates an invariant."""


@dataclass(frozen=True)
class SystemDims:
    """Dimensions (d1, d2) of the two tensor factors."""

    d1: int
    d2: int

    def __post_init__(self):
        if not (isinstance(self.d1, (int, np.integer)) and isinstance(self.d2, (int, np.integer))):
            raise ValidationError(f"dims must be integers, got ({self.d1!r}, {self.d2!r})")
        if self.d1 < 2 or self.d2 < 2:
            raise ValidationError(f"bipartite dims require d1, d2 >= 2, got ({self.d1}, {self.d2})")

    @property
    def total(self) -> int:
        return self.d1 * self.d2


def _herm_defect(m: np.ndarray) -> float:
    return float(np.linalg.norm(m - m.conj().T))


@dataclass(frozen=True)
class BipartiteOperator:
    """Hermitian operator on C^{d1} (x) C^{d2}, stored as a dense complex matrix."""

    dims: SystemDims
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        d = self.dims.total
        if m.shape != (d, d):
            raise ValidationError(
                f"matrix shape {m.shape} does not match dims {self.dims.d1}x{self.dims.d2} (total {d})"
            )
        if _herm_defect(m) > TAU_HERM * (1.0 + np.linalg.norm(m)):
            raise ValidationError(
                f"matrix is not Hermitian (defect {_herm_defect(m):.3e})"
            )
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    # Real-linear combinations of Hermitian operators stay Hermitian, so the
    # constructor check is cheap insurance rather than a burden here.
    def __add__(self, other: "BipartiteOperator") -> "BipartiteOperator":
        self._check_same_dims(other)
        return BipartiteOperator(self.dims, self.matrix + other.matrix)

    def __sub__(self, other: "BipartiteOperator") -> "BipartiteOperator":
        self._check_same_dims(other)
        return BipartiteOperator(self.dims, self.matrix - other.matrix)

    def __mul__(self, scalar) -> "BipartiteOperator":
        if not np.isrealobj(np.asarray(scalar)) or np.ndim(scalar) != 0:
            raise ValidationError("operators only scale by real scalars")
        return BipartiteOperator(self.dims, float(scalar) * self.matrix)

    __rmul__ = __mul__

    def __neg__(self) -> "BipartiteOperator":
        return BipartiteOperator(self.dims, -self.matrix)

    def _check_same_dims(self, other: "BipartiteOperator"):
        if self.dims != other.dims:
            raise ValidationError(f"dims mismatch: {self.dims} vs {other.dims}")

    @property
    def norm(self) -> float:
        """Frobenius norm."""
        return float(np.linalg.norm(self.matrix))

    @property
    def trace(self) -> float:
        tr = complex(np.trace(self.matrix))
        return tr.real


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues (ascending) and orthonormal eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def identity(dims: SystemDims) -> BipartiteOperator:
    return BipartiteOperator(dims, np.eye(dims.total, dtype=complex))


def zero(dims: SystemDims) -> BipartiteOperator:
    return BipartiteOperator(dims, np.zeros((dims.total, dims.total), dtype=complex))


def tensor(x: np.ndarray, y: np.ndarray) -> BipartiteOperator:
    """Kronecker product of two Hermitian factors as a bipartite operator."""
    x = np.asarray(x, dtype=complex)
    y = np.asarray(y, dtype=complex)
    for name, m in (("first", x), ("second", y)):
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValidationError(f"{name} factor is not a square matrix")
        if _herm_defect(m) > TAU_HERM * (1.0 + np.linalg.norm(m)):
            raise ValidationError(f"{name} factor is not Hermitian")
    dims = SystemDims(x.shape[0], y.shape[0])
    return BipartiteOperator(dims, np.kron(x, y))


def partial_transpose_matrix(m: np.ndarray, d1: int, d2: int) -> np.ndarray:
    """Transpose the second factor only: <ij|A^G|kl> = <il|A|kj>."""
    d = d1 * d2
    return np.ascontiguousarray(
        m.reshape(d1, d2, d1, d2).transpose(0, 3, 2, 1).reshape(d, d)
    )


def partial_transpose(a: BipartiteOperator) -> BipartiteOperator:
    """Partial transposition on the second factor.

    A pure index permutation, hence exactly linear, trace preserving and an
    involution with no floating-point error.
    """
    return BipartiteOperator(a.dims, partial_transpose_matrix(a.matrix, a.dims.d1, a.dims.d2))


def min_eigenvalue(a: BipartiteOperator) -> float:
    """Smallest eigenvalue of a Hermitian operator."""
    return float(np.linalg.eigvalsh(a.matrix)[0])


def is_psd(a: BipartiteOperator, tol: float = TAU_PSD) -> bool:
    return min_eigenvalue(a) >= -tol


def spectrum(a: BipartiteOperator) -> Spectrum:
    """Full eigendecomposition with a reconstruction residual check."""
    vals, vecs = np.linalg.eigh(a.matrix)
    resid = np.linalg.norm(a.matrix - (vecs * vals) @ vecs.conj().T)
    scale = np.linalg.norm(a.matrix)
    if resid > TAU_EIG * max(scale, 1e-300):
        raise RuntimeError(
            f"eigendecomposition residual {resid:.3e} exceeds {TAU_EIG:.1e} * {scale:.3e}"
        )
    return Spectrum(eigenvalues=vals, eigenvectors=vecs)


def trace_inner(a: BipartiteOperator, b: BipartiteOperator) -> float:
    """Trace inner product Tr(AB) of two Hermitian operators, as a real number."""
    a._check_same_dims(b)
    val = complex(np.einsum("ij,ji->", a.matrix, b.matrix))
    scale = 1.0 + a.norm * b.norm
    if abs(val.imag) > TAU_HERM * scale:
        raise ValidationError(f"trace inner product has imaginary residue {val.imag:.3e}")
    return val.real


def _basis_ket(d: int, i: int, j: int) -> np.ndarray:
    v = np.zeros(d * d, dtype=complex)
    v[i * d + j] = 1.0
    return v


def _proj(v: np.ndarray) -> np.ndarray:
    return np.outer(v, v.conj())


_BELL_SIGNS = {1: (0, +1), 2: (0, -1), 3: (1, +1), 4: (1, -1)}


def bell_projector(d: int, k: int, i: int, j: int) -> BipartiteOperator:
    """Rank-1 Bell-type projector on the (i, j) two-level subspace.

    k = 1, 2 use (|ii> +- |jj>)/sqrt(2); k = 3, 4 use (|ij> +- |ji>)/sqrt(2).
    """
    _check_pair(d, i, j)
    if k not in _BELL_SIGNS:
        raise ValidationError(f"bell index k must be 1..4, got {k}")
    swap, sign = _BELL_SIGNS[k]
    if swap == 0:
        v = _basis_ket(d, i, i) + sign * _basis_ket(d, j, j)
    else:
        v = _basis_ket(d, i, j) + sign * _basis_ket(d, j, i)
    # scale after the outer product so every entry is an exact +-1/2
    return BipartiteOperator(SystemDims(d, d), 0.5 * _proj(v))


def diag_pair_projector(d: int, l: int, i: int, j: int) -> BipartiteOperator:
    """Projector |ii><ii| + |jj><jj| (l = 1) or |ij><ij| + |ji><ji| (l = 2)."""
    _check_pair(d, i, j)
    if l == 1:
        m = _proj(_basis_ket(d, i, i)) + _proj(_basis_ket(d, j, j))
    elif l == 2:
        m = _proj(_basis_ket(d, i, j)) + _proj(_basis_ket(d, j, i))
    else:
        raise ValidationError(f"pair projector index must be 1 or 2, got {l}")
    return BipartiteOperator(SystemDims(d, d), m)


def diag_pair_complement(d: int, l: int, i: int, j: int) -> BipartiteOperator:
    """Complement of diag_pair_projector inside the matching diagonal sector."""
    _check_pair(d, i, j)
    m = np.zeros((d * d, d * d), dtype=complex)
    if l == 1:
        for a in range(d):
            m += _proj(_basis_ket(d, a, a))
    elif l == 2:
        for a in range(d):
            for b in range(d):
                if a != b:
                    m += _proj(_basis_ket(d, a, b))
    else:
        raise ValidationError(f"pair projector index must be 1 or 2, got {l}")
    return BipartiteOperator(SystemDims(d, d), m) - diag_pair_projector(d, l, i, j)


def local_pair_identity(d: int, i: int, j: int) -> BipartiteOperator:
    """(|i><i| + |j><j|) (x) (|i><i| + |j><j|)."""
    _check_pair(d, i, j)
    p = np.zeros((d, d), dtype=complex)
    p[i, i] = 1.0
    p[j, j] = 1.0
    return tensor(p, p)


def bell_state(which: str) -> BipartiteOperator:
    """Two-qubit Bell projector: 'phi+', 'phi-', 'psi+' or 'psi-'."""
    kets = {
        "phi+": _basis_ket(2, 0, 0) + _basis_ket(2, 1, 1),
        "phi-": _basis_ket(2, 0, 0) - _basis_ket(2, 1, 1),
        "psi+": _basis_ket(2, 0, 1) + _basis_ket(2, 1, 0),
        "psi-": _basis_ket(2, 0, 1) - _basis_ket(2, 1, 0),
    }
    if which not in kets:
        raise ValidationError(f"unknown bell state {which!r}")
    return BipartiteOperator(SystemDims(2, 2), 0.5 * _proj(kets[which]))


def state_family(d: int, family: str, i: int | None = None, j: int | None = None) -> BipartiteOperator:
    """Dispatch to the named operator family on a d (x) d space.

    Families: psi1..psi4 (Bell-type projectors), pi1/pi2 (diagonal pair
    projectors), pi1_hat/pi2_hat (their in-sector complements), id_pair
    (local two-level identity), and phi+/phi-/psi+/psi- (d = 2 only).
    """
    if family in ("phi+", "phi-", "psi+", "psi-"):
        if d != 2:
            raise ValidationError(f"family {family!r} requires d = 2, got d = {d}")
        return bell_state(family)
    if i is None or j is None:
        raise ValidationError(f"family {family!r} needs subspace indices i < j")
    if family.startswith("psi") and family[3:].isdigit():
        return bell_projector(d, int(family[3:]), i, j)
    if family in ("pi1", "pi2"):
        return diag_pair_projector(d, int(family[2]), i, j)
    if family in ("pi1_hat", "pi2_hat"):
        return diag_pair_complement(d, int(family[2]), i, j)
    if family == "id_pair":
        return local_pair_identity(d, i, j)
    raise ValidationError(f"unknown operator family {family!r}")


def _check_pair(d: int, i: int, j: int):
    if d < 2:
        raise ValidationError(f"need d >= 2, got {d}")
    if not (0 <= i < d and 0 <= j < d):
        raise ValidationError(f"indices ({i}, {j}) out of range for d = {d}")
    if i >= j:
        raise ValidationError(f"need i < j, got i = {i}, j = {j}")


# --- JSON serialization -------------------------------------------------
#
# Operator files look like {"dims": [d1, d2], "matrix": [[[re, im], ...], ...]}
# with the matrix row-major.


def operator_to_dict(a: BipartiteOperator) -> dict:
    mat = [
        [[float(x.real), float(x.imag)] for x in row]
        for row in a.matrix
    ]
    return {"dims": [a.dims.d1, a.dims.d2], "matrix": mat}


def operator_from_dict(data: dict) -> BipartiteOperator:
    if not isinstance(data, dict):
        raise ValidationError("operator document must be a JSON object")
    for key in ("dims", "matrix"):
        if key not in data:
            raise ValidationError(f"operator document missing field {key!r}")
    dims_field = data["dims"]
    if not (isinstance(dims_field, (list, tuple)) and len(dims_field) == 2):
        raise ValidationError("field 'dims' must be a pair [d1, d2]")
    dims = SystemDims(int(dims_field[0]), int(dims_field[1]))
    d = dims.total
    raw = data["matrix"]
    if len(raw) != d or any(len(row) != d for row in raw):
        raise ValidationError(f"field 'matrix' must be {d}x{d} for dims {dims_field}")
    m = np.empty((d, d), dtype=complex)
    for r, row in enumerate(raw):
        for c, entry in enumerate(row):
            if not (isinstance(entry, (list, tuple)) and len(entry) == 2):
                raise ValidationError(f"matrix[{r}][{c}] must be a pair [re, im]")
            m[r, c] = complex(float(entry[0]), float(entry[1]))
    try:
        return BipartiteOperator(dims, m)
    except ValidationError as exc:
        raise ValidationError(f"field 'matrix': {exc}") from exc


def save_operator(a: BipartiteOperator, path) -> None:
    with open(path, "w") as fh:
        json.dump(operator_to_dict(a), fh)


def load_operator(path) -> BipartiteOperator:
    with open(path) as fh:
        data = json.load(fh)
    return operator_from_dict(data)

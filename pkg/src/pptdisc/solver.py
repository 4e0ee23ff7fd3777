"""Splitting solver for linear optimization over products of PSD cones.

Solves   minimize  sum_b <C_b, X_b>
         subject to sum_b <A_{m,b}, X_b> = r_m   (m = 1..M)
                    X_b >= 0                      (each block PSD)

by alternating projections onto the affine subspace and the cone product
with scaled dual updates (ADMM).  Complex Hermitian problems enter through
the real symmetric embedding [[Re, -Im], [Im, Re]].
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp
from scipy.linalg import cho_factor, cho_solve

EPS_FEAS = 1e-7
EPS_GAP = 1e-7


class SolverError(RuntimeError):
    """A solve failed structurally or a certificate did not verify."""


@dataclass
class SolverOptions:
    eps_feas: float = EPS_FEAS
    eps_gap: float = EPS_GAP
    max_iter: int = 200_000
    relaxation: float = 1.6
    rho: float = 1.0
    check_every: int = 25
    adapt_every: int = 100
    adapt_ratio: float = 10.0
    # Infeasibility is declared only after iterates stall for a full window
    # while residuals stay large and the improving-ray check passes.
    stall_tol: float = 1e-12
    stall_window: int = 1000
    infeas_factor: float = 1e3
    polish_rounds: int = 200
    polish_target: float = 1e-10
    seed: int | None = None


@dataclass(frozen=True)
class ConicProgram:
    """Block-diagonal PSD program with scalar equality constraints.

    constraints is a sequence of (coeffs, rhs) where coeffs maps a block
    index to its symmetric coefficient matrix.
    """

    block_sizes: tuple[int, ...]
    objective: tuple[np.ndarray, ...]
    constraints: tuple[tuple[dict[int, np.ndarray], float], ...]

    def __post_init__(self):
        if len(self.block_sizes) == 0:
            raise SolverError("program has no blocks")
        if len(self.objective) != len(self.block_sizes):
            raise SolverError("objective must supply one matrix per block")
        for b, (n, c) in enumerate(zip(self.block_sizes, self.objective)):
            _check_sym(c, n, f"objective[{b}]")
        if len(self.constraints) == 0:
            raise SolverError("constraint list is empty")
        for m, (coeffs, _) in enumerate(self.constraints):
            if not coeffs:
                raise SolverError(f"constraint {m} touches no block")
            for b, a in coeffs.items():
                if not (0 <= b < len(self.block_sizes)):
                    raise SolverError(f"constraint {m} references unknown block {b}")
                _check_sym(a, self.block_sizes[b], f"constraint[{m}][block {b}]")


def _check_sym(a: np.ndarray, n: int, what: str):
    a = np.asarray(a)
    if a.shape != (n, n):
        raise SolverError(f"{what} has shape {a.shape}, expected ({n}, {n})")
    if np.linalg.norm(a - a.T) > 1e-10 * (1.0 + np.linalg.norm(a)):
        raise SolverError(f"{what} is not symmetric")


@dataclass
class ConicSolution:
    status: str  # optimal | infeasible | unbounded | max_iter
    blocks: list[np.ndarray] | None
    y: np.ndarray | None
    dual_blocks: list[np.ndarray] | None
    primal_objective: float
    dual_objective: float
    value: float
    residuals: dict[str, float]
    iterations: int
    ray: np.ndarray | None = None
    ray_info: dict[str, float] = field(default_factory=dict)
    unbounded_direction: list[np.ndarray] | None = None


class _Workspace:
    """Precomputed vectorization, scaling and factorizations for one program."""

    def __init__(self, prog: ConicProgram):
        sizes = prog.block_sizes
        self.sizes = sizes
        self.offsets = np.concatenate([[0], np.cumsum([n * n for n in sizes])])
        self.n_vars = int(self.offsets[-1])

        # group equal-size blocks for batched eigendecompositions
        self.groups = {}
        for b, n in enumerate(sizes):
            self.groups.setdefault(n, []).append(b)
        self.group_idx = {
            n: np.concatenate([np.arange(self.offsets[b], self.offsets[b + 1]) for b in bs])
            for n, bs in self.groups.items()
        }

        c = np.zeros(self.n_vars)
        for b, cb in enumerate(prog.objective):
            c[self.offsets[b]:self.offsets[b + 1]] = np.asarray(cb, dtype=float).ravel()
        self.c_scale = float(np.linalg.norm(c))
        self.c = c / self.c_scale if self.c_scale > 0 else c

        rows, cols, vals = [], [], []
        b_vec = np.empty(len(prog.constraints))
        self.row_scale = np.empty(len(prog.constraints))
        for m, (coeffs, rhs) in enumerate(prog.constraints):
            pieces = []
            for b, a in coeffs.items():
                flat = np.asarray(a, dtype=float).ravel()
                nz = np.nonzero(flat)[0]
                pieces.append((self.offsets[b] + nz, flat[nz]))
            norm = np.sqrt(sum(float(v @ v) for _, v in pieces))
            if norm == 0.0:
                raise SolverError(f"constraint {m} has zero coefficient matrix")
            self.row_scale[m] = norm
            for idx, v in pieces:
                rows.append(np.full(len(idx), m))
                cols.append(idx)
                vals.append(v / norm)
            b_vec[m] = rhs / norm
        self.A = sp.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
            shape=(len(prog.constraints), self.n_vars),
        )
        self.b = b_vec

        gram = (self.A @ self.A.T).toarray()
        try:
            self._cho = cho_factor(gram, check_finite=False)
            self._pinv = None
        except np.linalg.LinAlgError:
            # rank-deficient constraints: fall back to a spectral pseudo-inverse
            w, v = np.linalg.eigh(gram)
            keep = w > 1e-12 * w[-1]
            if not keep.any():
                raise SolverError("constraints have rank 0 after row scaling")
            self._cho = None
            self._pinv = (v[:, keep], 1.0 / w[keep])

    def solve_gram(self, r: np.ndarray) -> np.ndarray:
        if self._cho is not None:
            return cho_solve(self._cho, r, check_finite=False)
        v, winv = self._pinv
        return v @ ((v.T @ r) * winv)

    def affine_project(self, v: np.ndarray) -> np.ndarray:
        xi = self.solve_gram(self.A @ v - self.b)
        return v - self.A.T @ xi

    def psd_project(self, v: np.ndarray) -> np.ndarray:
        out = np.empty_like(v)
        for n, bs in self.groups.items():
            idx = self.group_idx[n]
            mats = v[idx].reshape(len(bs), n, n)
            mats = 0.5 * (mats + mats.transpose(0, 2, 1))
            w, q = np.linalg.eigh(mats)
            np.clip(w, 0.0, None, out=w)
            out[idx] = np.einsum("gij,gj,gkj->gik", q, w, q).ravel()
        return out

    def block_view(self, v: np.ndarray, b: int) -> np.ndarray:
        n = self.sizes[b]
        return v[self.offsets[b]:self.offsets[b + 1]].reshape(n, n)

    def blocks(self, v: np.ndarray) -> list[np.ndarray]:
        return [self.block_view(v, b).copy() for b in range(len(self.sizes))]

    def min_block_eig(self, v: np.ndarray) -> float:
        worst = np.inf
        for n, bs in self.groups.items():
            idx = self.group_idx[n]
            mats = v[idx].reshape(len(bs), n, n)
            mats = 0.5 * (mats + mats.transpose(0, 2, 1))
            worst = min(worst, float(np.linalg.eigvalsh(mats)[:, 0].min()))
        return worst


def solve(prog: ConicProgram, options: SolverOptions | None = None) -> ConicSolution:
    """Run the splitting iteration until the residual targets are met.

    Deterministic for identical inputs and options; the optional seed only
    drives a single random restart when the main pass hits max_iter.
    """
    opts = options or SolverOptions()
    ws = _Workspace(prog)
    sol = _run(prog, ws, opts, init=None)
    if sol.status == "max_iter" and opts.seed is not None:
        rng = np.random.default_rng(opts.seed)
        init = 0.1 * rng.standard_normal(ws.n_vars)
        retry = _run(prog, ws, opts, init=init)
        if retry.status != "max_iter":
            return retry
    return sol


def _run(prog, ws, opts, init):
    n = ws.n_vars
    z = ws.psd_project(init) if init is not None else np.zeros(n)
    u = np.zeros(n)
    x = np.zeros(n)
    rho = opts.rho
    alpha = opts.relaxation
    c = ws.c

    stall = 0
    prim_res = dual_res = gap = np.inf
    z_check = z.copy()
    z_probe = z.copy()
    status = "max_iter"
    y = None
    iters = 0

    for k in range(1, opts.max_iter + 1):
        iters = k
        x_prev, z_prev = x, z
        x = ws.affine_project(z - u - c / rho)
        xh = alpha * x + (1.0 - alpha) * z
        z = ws.psd_project(xh + u)
        u = u + xh - z

        dx = np.linalg.norm(x - x_prev) / (1.0 + np.linalg.norm(x))
        dz = np.linalg.norm(z - z_prev) / (1.0 + np.linalg.norm(z))
        cone_gap = np.linalg.norm(x - z)
        if max(dx, dz) < opts.stall_tol and cone_gap / (1.0 + np.linalg.norm(z)) > opts.infeas_factor * opts.eps_feas:
            stall += 1
        else:
            stall = 0

        if stall >= opts.stall_window:
            ray, info = _improving_ray(prog, ws, x, z)
            stall = 0
            if ray is not None:
                return ConicSolution(
                    status="infeasible", blocks=None, y=None, dual_blocks=None,
                    primal_objective=np.nan, dual_objective=np.nan, value=np.nan,
                    residuals={"primal": cone_gap, "dual": np.nan, "gap": np.nan},
                    iterations=k, ray=ray, ray_info=info,
                )

        if k % opts.check_every == 0:
            y = ws.solve_gram(ws.A @ (c + rho * u))
            prim_res = np.linalg.norm(ws.A @ z - ws.b) / (1.0 + np.linalg.norm(ws.b))
            dual_res = np.linalg.norm(c + rho * u - ws.A.T @ y) / (1.0 + np.linalg.norm(c))
            pobj = float(c @ z)
            dobj = float(ws.b @ y)
            gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))
            if prim_res <= opts.eps_feas and dual_res <= opts.eps_feas and gap <= opts.eps_gap:
                status = "optimal"
                break
            direction = _unbounded_direction(ws, z, z_probe)
            z_probe = z.copy()
            if direction is not None:
                return ConicSolution(
                    status="unbounded", blocks=None, y=None, dual_blocks=None,
                    primal_objective=-np.inf, dual_objective=np.nan, value=-np.inf,
                    residuals={"primal": prim_res, "dual": dual_res, "gap": np.nan},
                    iterations=k, unbounded_direction=ws.blocks(direction),
                )

        if k % opts.adapt_every == 0:
            r_p = np.linalg.norm(x - z)
            r_d = rho * np.linalg.norm(z - z_check)
            z_check = z.copy()
            if r_p > opts.adapt_ratio * r_d and rho < 1e4:
                rho *= 2.0
                u *= 0.5
            elif r_d > opts.adapt_ratio * r_p and rho > 1e-4:
                rho *= 0.5
                u *= 2.0

    if status == "optimal":
        z = _polish(ws, z, opts)
        y = ws.solve_gram(ws.A @ (c + rho * u))
        prim_res = np.linalg.norm(ws.A @ z - ws.b) / (1.0 + np.linalg.norm(ws.b))
        dual_res = np.linalg.norm(c + rho * u - ws.A.T @ y) / (1.0 + np.linalg.norm(c))
        pobj = float(c @ z)
        dobj = float(ws.b @ y)
        gap = abs(pobj - dobj) / (1.0 + abs(pobj) + abs(dobj))

    scale = ws.c_scale if ws.c_scale > 0 else 1.0
    y_out = None if y is None else scale * (y / ws.row_scale)
    pobj_out = scale * float(c @ z)
    dobj_out = scale * float(ws.b @ y) if y is not None else np.nan
    s_out = None
    if y is not None:
        s_vec = scale * (c - ws.A.T @ y)
        s_out = ws.blocks(s_vec)
    return ConicSolution(
        status=status,
        blocks=ws.blocks(z),
        y=y_out,
        dual_blocks=s_out,
        primal_objective=pobj_out,
        dual_objective=dobj_out,
        value=0.5 * (pobj_out + dobj_out) if status == "optimal" else pobj_out,
        residuals={"primal": float(prim_res), "dual": float(dual_res), "gap": float(gap)},
        iterations=iters,
    )


def _polish(ws, z, opts):
    """Alternating projections to tighten feasibility of the converged point."""
    best = z
    best_viol = np.linalg.norm(ws.A @ z - ws.b)
    for _ in range(opts.polish_rounds):
        z = ws.psd_project(ws.affine_project(z))
        viol = np.linalg.norm(ws.A @ z - ws.b)
        if viol < best_viol:
            best, best_viol = z, viol
        if viol <= opts.polish_target:
            break
    return best


def _improving_ray(prog, ws, x, z):
    """Certify primal infeasibility from the limiting displacement x - z.

    Returns multipliers y with sum_m y_m A_{m,b} <= 0 per block and y.r > 0,
    in the original (unscaled) constraint numbering, or (None, reason).
    """
    v = x - z
    vnorm = np.linalg.norm(v)
    if vnorm == 0.0:
        return None, {"reason": "zero displacement"}
    xi = ws.solve_gram(ws.A @ v)
    recon = np.linalg.norm(ws.A.T @ xi - v)
    if recon > 1e-6 * vnorm:
        return None, {"reason": "displacement not in constraint range", "recon": float(recon)}
    xi = xi / vnorm
    lam_max = -ws.min_block_eig(-(ws.A.T @ xi))
    margin = float(ws.b @ xi)
    if lam_max > EPS_FEAS or margin <= 10 * EPS_FEAS:
        return None, {"reason": "ray check failed", "lam_max": float(lam_max), "margin": margin}
    y = xi / ws.row_scale
    return y, {"lam_max": float(lam_max), "margin": margin}


def _unbounded_direction(ws, z, z_prev):
    """Verified recession direction with negative objective, if the iterates blow up."""
    if np.linalg.norm(z) < 1e5 * (1.0 + np.linalg.norm(ws.b)):
        return None
    d = z - z_prev
    dn = np.linalg.norm(d)
    if dn == 0.0:
        return None
    d = d / dn
    # pull the candidate into null(A) intersect PSD before judging it
    for _ in range(20):
        d = d - ws.A.T @ ws.solve_gram(ws.A @ d)
        d = ws.psd_project(d)
    dn = np.linalg.norm(d)
    if dn < 1e-3:
        return None
    d = d / dn
    if np.linalg.norm(ws.A @ d) > 1e-7:
        return None
    if ws.min_block_eig(d) < -1e-7:
        return None
    if float(ws.c @ d) > -1e-7:
        return None
    return d


# --- Complex Hermitian layer ---------------------------------------------


@dataclass(frozen=True)
class HermitianProgram:
    """Same shape as ConicProgram but with complex Hermitian data per block."""

    block_dims: tuple[int, ...]
    objective: tuple[np.ndarray, ...]
    constraints: tuple[tuple[dict[int, np.ndarray], float], ...]


@dataclass
class HermitianSolution:
    status: str
    blocks: list[np.ndarray] | None
    y: np.ndarray | None
    dual_blocks: list[np.ndarray] | None
    primal_objective: float
    dual_objective: float
    value: float
    residuals: dict[str, float]
    iterations: int
    embed_residual: float
    ray: np.ndarray | None = None
    ray_info: dict[str, float] = field(default_factory=dict)
    _constraints: tuple = ()

    def ray_operator(self, block: int) -> np.ndarray:
        """Hermitian combination sum_m y_m A_{m,block} along the improving ray."""
        if self.ray is None:
            raise SolverError("solution carries no infeasibility ray")
        d = None
        for (coeffs, _), ym in zip(self._constraints, self.ray):
            a = coeffs.get(block)
            if a is None:
                continue
            d = ym * a if d is None else d + ym * a
        if d is None:
            raise SolverError(f"no constraint touches block {block}")
        return d


def _embed_matrix(a: np.ndarray) -> np.ndarray:
    re, im = a.real, a.imag
    return 0.5 * np.block([[re, -im], [im, re]])


def embed_complex(prog: HermitianProgram) -> ConicProgram:
    """Real symmetric embedding [[Re, -Im], [Im, Re]] of a Hermitian program.

    The 1/2 factor on objective and constraint matrices makes real-embedded
    inner products equal the complex trace inner products, so objective
    values and multipliers transfer without rescaling.
    """
    for b, (dim, cb) in enumerate(zip(prog.block_dims, prog.objective)):
        _check_herm(cb, dim, f"objective[{b}]")
    for m, (coeffs, _) in enumerate(prog.constraints):
        for b, a in coeffs.items():
            _check_herm(a, prog.block_dims[b], f"constraint[{m}][block {b}]")
    return ConicProgram(
        block_sizes=tuple(2 * d for d in prog.block_dims),
        objective=tuple(_embed_matrix(cb) for cb in prog.objective),
        constraints=tuple(
            ({b: _embed_matrix(a) for b, a in coeffs.items()}, rhs)
            for coeffs, rhs in prog.constraints
        ),
    )


def _check_herm(a: np.ndarray, d: int, what: str):
    a = np.asarray(a)
    if a.shape != (d, d):
        raise SolverError(f"{what} has shape {a.shape}, expected ({d}, {d})")
    if np.linalg.norm(a - a.conj().T) > 1e-10 * (1.0 + np.linalg.norm(a)):
        raise SolverError(f"{what} is not Hermitian")


def _recover_block(xt: np.ndarray, d: int) -> tuple[np.ndarray, float]:
    """Invert the embedding; returns (complex matrix, J-commutation residual)."""
    a, bm = xt[:d, :d], xt[:d, d:]
    cm, dm = xt[d:, :d], xt[d:, d:]
    resid = np.sqrt(np.linalg.norm(a - dm) ** 2 + np.linalg.norm(bm + cm) ** 2)
    x = 0.5 * (a + dm) + 0.5j * (cm - bm)
    x = 0.5 * (x + x.conj().T)
    return x, float(resid)


def recover_hermitian(prog: HermitianProgram, sol: ConicSolution,
                      eps: float = EPS_FEAS) -> HermitianSolution:
    """Map a real embedded solution back to complex Hermitian blocks.

    Asserts that each primal block commutes with the complex structure J
    (equivalently, that it lies in the image of the embedding) to within eps.
    """
    blocks = None
    embed_residual = 0.0
    if sol.blocks is not None:
        blocks = []
        for dim, xt in zip(prog.block_dims, sol.blocks):
            x, resid = _recover_block(xt, dim)
            if resid > eps * (1.0 + np.linalg.norm(xt)):
                raise SolverError(
                    f"embedded block breaks the complex symmetry (residual {resid:.3e})"
                )
            embed_residual = max(embed_residual, resid)
            blocks.append(x)
    dual_blocks = None
    if sol.y is not None:
        # exact complex-side slack: S_b = C_b - sum_m y_m A_{m,b}
        dual_blocks = []
        for b, dim in enumerate(prog.block_dims):
            s = np.array(prog.objective[b], dtype=complex)
            for (coeffs, _), ym in zip(prog.constraints, sol.y):
                a = coeffs.get(b)
                if a is not None:
                    s = s - ym * a
            dual_blocks.append(0.5 * (s + s.conj().T))
    return HermitianSolution(
        status=sol.status,
        blocks=blocks,
        y=sol.y,
        dual_blocks=dual_blocks,
        primal_objective=sol.primal_objective,
        dual_objective=sol.dual_objective,
        value=sol.value,
        residuals=sol.residuals,
        iterations=sol.iterations,
        embed_residual=embed_residual,
        ray=sol.ray,
        ray_info=sol.ray_info,
        _constraints=prog.constraints,
    )


def solve_hermitian(prog: HermitianProgram, options: SolverOptions | None = None) -> HermitianSolution:
    t0 = time.perf_counter()
    sol = solve(embed_complex(prog), options)
    out = recover_hermitian(prog, sol, (options or SolverOptions()).eps_feas)
    out.residuals = dict(out.residuals)
    out.residuals["wall_ms"] = 1e3 * (time.perf_counter() - t0)
    return out


def hermitian_basis(d: int) -> list[np.ndarray]:
    """Orthonormal basis of d x d Hermitian matrices under Tr(AB)."""
    basis = []
    s = 1.0 / np.sqrt(2.0)
    for a in range(d):
        e = np.zeros((d, d), dtype=complex)
        e[a, a] = 1.0
        basis.append(e)
    for a in range(d):
        for b in range(a + 1, d):
            e = np.zeros((d, d), dtype=complex)
            e[a, b] = s
            e[b, a] = s
            basis.append(e)
            f = np.zeros((d, d), dtype=complex)
            f[a, b] = 1j * s
            f[b, a] = -1j * s
            basis.append(f)
    return basis


def operator_equality(terms: dict[int, tuple[float, object]], target: np.ndarray,
                      basis: list[np.ndarray]) -> list[tuple[dict[int, np.ndarray], float]]:
    """Constraint rows encoding  sum_b coeff_b * T_b(X_b) = target.

    terms maps block index -> (coeff, transform); transform is either None
    or a self-adjoint matrix map (the partial transpose is the only one used
    here, and it is self-adjoint under the trace inner product).
    """
    rows = []
    for g in basis:
        coeffs = {}
        for b, (coeff, transform) in terms.items():
            m = transform(g) if transform is not None else g
            coeffs[b] = coeff * m
        rhs = complex(np.einsum("ij,ji->", g, target))
        rows.append((coeffs, float(rhs.real)))
    return rows

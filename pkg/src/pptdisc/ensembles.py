"""Built-in ensemble families, witness-based constructions, and JSON I/O.

Three catalog families with known closed-form discrimination values:

  1. bell_mixture_ensemble   -- 2d(d-1) mixed states over the two-level
     Bell/diagonal projector families plus background noise, together with
     the matching one-local-measurement POVM.  The PPT optimum is
     (6 + lam (2d-3)(d+2)) / (12 d (d-1)) and sits strictly below the
     global optimum.
  2. orthogonal_triple_ensemble -- two product states and one maximally
     entangled state, all values equal to 1, with a one-parameter family of
     dual minimizers orthogonal_triple_dual(t).
  3. anchored_bell_ensemble  -- a maximally mixed anchor plus isotropically
     noised Bell-type states; blindly guessing the anchor attains the PPT
     optimum d / (5d - 4), and equality with the global optimum switches at
     lam = d^2 / (2 (d^2 - 1)).
"""

from __future__ import annotations

import json

import numpy as np

from .cones import classify_witness
from .discrimination import Ensemble, Measurement
from .operators import (
    TAU_PSD,
    BipartiteOperator,
    SystemDims,
    ValidationError,
    bell_projector,
    bell_state,
    diag_pair_projector,
    identity,
    operator_from_dict,
    operator_to_dict,
    spectrum,
    tensor,
)
from .solver import SolverOptions


def pair_indices(d: int) -> list[tuple[int, int]]:
    """Lexicographic i < j pairs; fixes the item ordering of families 1 and 3."""
    return [(i, j) for i in range(d) for j in range(i + 1, d)]


def closed_form_bell_mixture(d: int, lam: float) -> float:
    return (6.0 + lam * (2 * d - 3) * (d + 2)) / (12.0 * d * (d - 1))


def closed_form_anchored(d: int) -> float:
    return d / (5.0 * d - 4.0)


def equality_threshold_anchored(d: int) -> float:
    return d * d / (2.0 * (d * d - 1.0))


def bell_mixture_ensemble(d: int, lam: float,
                          sigma: BipartiteOperator | None = None
                          ) -> tuple[Ensemble, Measurement]:
    """Family 1: 2d(d-1) equiprobable mixtures with its local measurement.

    States are (lam/3)(Psi^(k) + Pi^(l)) + (1-lam)sigma over i < j and
    k, l in {1, 2}; the measurement detects the diagonal pair subspaces and
    is implementable by the same local basis measurement on both parties.
    """
    if d < 2:
        raise ValidationError(f"need d >= 2, got {d}")
    if not (0.0 < lam <= 1.0):
        raise ValidationError(f"lam = {lam} outside (0, 1]")
    dims = SystemDims(d, d)
    if sigma is None:
        sigma = (1.0 / (d * d)) * identity(dims)
    if sigma.dims != dims:
        raise ValidationError(f"sigma has dims {sigma.dims}, expected {dims}")
    if abs(sigma.trace - 1.0) > 1e-10 or not _psd(sigma):
        raise ValidationError("sigma must be a density operator")

    n = 2 * d * (d - 1)
    eta = 1.0 / n
    items, elements, labels = [], [], []
    for (i, j) in pair_indices(d):
        for k in (1, 2):
            for l in (1, 2):
                rho = (lam / 3.0) * (bell_projector(d, k, i, j) + diag_pair_projector(d, l, i, j)) \
                    + (1.0 - lam) * sigma
                items.append((eta, rho))
                labels.append(f"i={i},j={j},k={k},l={l}")
                if l == 1:
                    m = (1.0 / (2.0 * (d - 1))) * diag_pair_projector(d, 1, i, j)
                else:
                    m = 0.5 * diag_pair_projector(d, 2, i, j)
                elements.append(m)
    ensemble = Ensemble(dims, tuple(items), metadata={"family": 1, "d": d, "lam": lam,
                                                      "labels": labels})
    measurement = Measurement(dims, tuple(elements),
                              metadata={"locc_by_construction": True, "labels": labels})
    if not measurement.is_ppt():
        raise ValidationError("family-1 measurement failed the PPT check")
    return ensemble, measurement


def orthogonal_triple_ensemble() -> Ensemble:
    """Family 2: |00>, |11> and the maximally entangled (|01>+|10>)/sqrt(2)."""
    dims = SystemDims(2, 2)
    k0 = np.array([[1.0, 0.0], [0.0, 0.0]], dtype=complex)
    k1 = np.array([[0.0, 0.0], [0.0, 1.0]], dtype=complex)
    items = (
        (1.0 / 3.0, tensor(k0, k0)),
        (1.0 / 3.0, tensor(k1, k1)),
        (1.0 / 3.0, bell_state("psi+")),
    )
    return Ensemble(dims, items, metadata={"family": 2})


def orthogonal_triple_dual(t: float) -> BipartiteOperator:
    """Unit-trace dual minimizer family H(t) for the orthogonal triple.

    For every t in [0, 1] all three differences H - eta_i rho_i are
    decomposable; for t < 1 the third one is a decomposable witness, while
    at t = 1 all three are PSD.
    """
    if not (0.0 <= t <= 1.0):
        raise ValidationError(f"t = {t} outside [0, 1]")
    return (1.0 / 3.0) * (bell_state("phi+") + bell_state("phi-")) \
        + ((1.0 + t) / 6.0) * bell_state("psi+") \
        + ((1.0 - t) / 6.0) * bell_state("psi-")


def anchored_bell_ensemble(d: int, lam: float) -> Ensemble:
    """Family 3: maximally mixed anchor plus 2d(d-1) noised Bell-type states."""
    if d < 2:
        raise ValidationError(f"need d >= 2, got {d}")
    if not (0.0 <= lam < 1.0):
        raise ValidationError(f"lam = {lam} outside [0, 1)")
    dims = SystemDims(d, d)
    eye = identity(dims)
    anchor = (1.0 / (d * d)) * eye
    eta1 = d / (5.0 * d - 4.0)
    eta_rest = 2.0 / (d * (5.0 * d - 4.0))
    items = [(eta1, anchor)]
    labels = ["anchor"]
    for (i, j) in pair_indices(d):
        for k in (1, 2, 3, 4):
            rho = (1.0 - lam) * bell_projector(d, k, i, j) + (lam / (d * d)) * eye
            items.append((eta_rest, rho))
            labels.append(f"i={i},j={j},k={k}")
    return Ensemble(dims, tuple(items),
                    metadata={"family": 3, "d": d, "lam": lam, "labels": labels})


def anchored_bell_difference(d: int, lam: float, i: int, j: int, k: int) -> BipartiteOperator:
    """Pivot difference eta_1 rho_1 - eta_{i,j}^{(k)} rho_{i,j}^{(k)} of family 3.

    Decomposable for every parameter choice; PSD exactly when
    2 lam d^2 - 2 lam - d^2 >= 0, i.e. above the equality threshold.  The
    non-PSD regime is the stock source of decomposable witnesses here.
    """
    if not (0.0 <= lam < 1.0):
        raise ValidationError(f"lam = {lam} outside [0, 1)")
    dims = SystemDims(d, d)
    eye = identity(dims)
    eta1 = d / (5.0 * d - 4.0)
    eta_rest = 2.0 / (d * (5.0 * d - 4.0))
    anchor = (1.0 / (d * d)) * eye
    rho = (1.0 - lam) * bell_projector(d, k, i, j) + (lam / (d * d)) * eye
    return eta1 * anchor - eta_rest * rho


def default_compensator(w: BipartiteOperator) -> BipartiteOperator:
    """Negative-eigenspace projector of W scaled by |min eigenvalue|.

    The smallest P (in the canonical sense used here) with P + W PSD.
    """
    spec = spectrum(w)
    neg = spec.eigenvalues < 0.0
    if not neg.any():
        return BipartiteOperator(w.dims, np.zeros_like(w.matrix))
    v = spec.eigenvectors[:, neg]
    scale = abs(float(spec.eigenvalues[0]))
    return BipartiteOperator(w.dims, scale * (v @ v.conj().T))


def ensemble_from_dew(w: BipartiteOperator, p: BipartiteOperator | None = None,
                      options: SolverOptions | None = None,
                      witness_class=None) -> Ensemble:
    """Two-state ensemble whose weighted difference is proportional to W.

    W must classify as a decomposable witness and P must be PSD with
    P + W PSD.  The construction guarantees that PPT measurements cannot
    reach the global optimum, which is recorded as a checkable claim in the
    metadata.
    """
    wc = witness_class if witness_class is not None else classify_witness(w, options)
    if wc.classification != "dew":
        raise ValidationError(
            f"operator classifies as {wc.classification!r}, need a decomposable witness"
        )
    if p is None:
        p = default_compensator(w)
    if p.dims != w.dims:
        raise ValidationError("compensator dims do not match the witness")
    if not _psd(p):
        raise ValidationError("compensator is not positive semidefinite")
    if not _psd(p + w):
        raise ValidationError("compensator + witness is not positive semidefinite")
    denom = 2.0 * p.trace + w.trace
    if denom <= 0.0:
        raise ValidationError(f"Tr(2P + W) = {denom} must be positive")
    tr_pw = p.trace + w.trace
    tr_p = p.trace
    if tr_pw <= 0.0 or tr_p <= 0.0:
        raise ValidationError("both construction parts need positive trace")
    items = (
        (tr_pw / denom, (1.0 / tr_pw) * (p + w)),
        (tr_p / denom, (1.0 / tr_p) * p),
    )
    return Ensemble(w.dims, items, metadata={
        "construction": "from_dew",
        "claim": "ppt_below_global",
        "witness_scale": 1.0 / denom,
    })


def ensemble_from_dews(witnesses, lambdas=None,
                       options: SolverOptions | None = None) -> Ensemble:
    """Uniform anchor plus one state per witness, each difference ~ W_i.

    Every 1 - lam_i W_i must stay PSD; by default lam_i = 1/max_eig(W_i).
    """
    witnesses = list(witnesses)
    if len(witnesses) == 0:
        raise ValidationError("need at least one witness")
    dims = witnesses[0].dims
    for idx, w in enumerate(witnesses):
        if w.dims != dims:
            raise ValidationError(f"witness {idx} has dims {w.dims}, expected {dims}")
        wc = classify_witness(w, options)
        if wc.classification != "dew":
            raise ValidationError(
                f"witness {idx} classifies as {wc.classification!r}, need a decomposable witness"
            )
    if lambdas is None:
        lambdas = [1.0 / float(spectrum(w).eigenvalues[-1]) for w in witnesses]
    lambdas = [float(l) for l in lambdas]
    if len(lambdas) != len(witnesses):
        raise ValidationError("need one scale per witness")
    eye = identity(dims)
    parts = []
    for idx, (w, lam) in enumerate(zip(witnesses, lambdas)):
        if lam <= 0.0:
            raise ValidationError(f"scale {idx} must be positive, got {lam}")
        part = eye - lam * w
        lo = spectrum(part).eigenvalues[0]
        if lo < -TAU_PSD:
            raise ValidationError(
                f"1 - lam_{idx} W_{idx} loses positive semidefiniteness "
                f"(min eigenvalue {lo:.3e})"
            )
        parts.append(part)
    denom = (len(witnesses) + 1) * eye.trace - sum(lam * w.trace for w, lam in zip(witnesses, lambdas))
    items = [(eye.trace / denom, (1.0 / eye.trace) * eye)]
    for part in parts:
        items.append((part.trace / denom, (1.0 / part.trace) * part))
    return Ensemble(dims, tuple(items), metadata={
        "construction": "from_dews",
        "claim": "ppt_below_global",
        "witness_scales": [lam / denom for lam in lambdas],
    })


def _psd(a: BipartiteOperator) -> bool:
    return spectrum(a).eigenvalues[0] >= -TAU_PSD


# --- JSON I/O -------------------------------------------------------------


def ensemble_to_dict(e: Ensemble) -> dict:
    return {
        "dims": [e.dims.d1, e.dims.d2],
        "items": [{"eta": float(eta), "rho": operator_to_dict(rho)} for eta, rho in e.items],
        "metadata": _plain(e.metadata),
    }


def ensemble_from_dict(data: dict) -> Ensemble:
    if not isinstance(data, dict):
        raise ValidationError("ensemble document must be a JSON object")
    for key in ("dims", "items"):
        if key not in data:
            raise ValidationError(f"ensemble document missing field {key!r}")
    dims_field = data["dims"]
    if not (isinstance(dims_field, (list, tuple)) and len(dims_field) == 2):
        raise ValidationError("field 'dims' must be a pair [d1, d2]")
    dims = SystemDims(int(dims_field[0]), int(dims_field[1]))
    items = []
    for idx, entry in enumerate(data["items"]):
        if "eta" not in entry or "rho" not in entry:
            raise ValidationError(f"items[{idx}] must carry 'eta' and 'rho'")
        try:
            rho = operator_from_dict(entry["rho"])
        except ValidationError as exc:
            raise ValidationError(f"items[{idx}].rho: {exc}") from exc
        items.append((float(entry["eta"]), rho))
    return Ensemble(dims, tuple(items), metadata=dict(data.get("metadata") or {}))


def measurement_to_dict(m: Measurement) -> dict:
    return {
        "dims": [m.dims.d1, m.dims.d2],
        "elements": [operator_to_dict(el) for el in m.elements],
        "metadata": _plain(m.metadata),
    }


def measurement_from_dict(data: dict) -> Measurement:
    if not isinstance(data, dict):
        raise ValidationError("measurement document must be a JSON object")
    for key in ("dims", "elements"):
        if key not in data:
            raise ValidationError(f"measurement document missing field {key!r}")
    dims_field = data["dims"]
    dims = SystemDims(int(dims_field[0]), int(dims_field[1]))
    elements = []
    for idx, entry in enumerate(data["elements"]):
        try:
            elements.append(operator_from_dict(entry))
        except ValidationError as exc:
            raise ValidationError(f"elements[{idx}]: {exc}") from exc
    return Measurement(dims, tuple(elements), metadata=dict(data.get("metadata") or {}))


def _plain(value):
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    return value


def save_ensemble(e: Ensemble, path) -> None:
    with open(path, "w") as fh:
        json.dump(ensemble_to_dict(e), fh)


def load_ensemble(path) -> Ensemble:
    with open(path) as fh:
        return ensemble_from_dict(json.load(fh))


def save_measurement(m: Measurement, path) -> None:
    with open(path, "w") as fh:
        json.dump(measurement_to_dict(m), fh)


def load_measurement(path) -> Measurement:
    with open(path) as fh:
        return measurement_from_dict(json.load(fh))

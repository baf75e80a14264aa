"""Operator orbits over atomic measures and the identity checks built on them.

Constructions (ν an atomic probability measure, e_n = e^{2πinx}, 𝟙 = e_0):

- singular shift      L f = e_1 f - <f, e_{-1}> 𝟙, seed 𝟙
- perturbed conjugate T = V^{-1} L V (written as V^{-1} M_e V minus a rank-one term), seed V^{-1} 𝟙
- mainsingular        T f = e_1 f - <e_1 f, 𝟙>_μ g_0, seed g_0 with <g_0, 𝟙>_μ = 1

Everything is verified forward: (V, ν) or (μ, g_0) are known by construction.
Each verifier returns a graded ``VerificationReport``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import StrEnum

import numpy as np

from app.core.config import settings
from app.core.errors import (
    InvalidMeasureError,
    PreconditionError,
    SingularOperatorError,
)
from app.schemas import EffectivenessVerdict, FrameClass, GrowthCurve, VerificationReport
from app.services import frames
from app.services.frames import FrameSequence
from app.services.hilbert import (
    LinearMap,
    SpaceDesc,
    Vector,
    adjoint,
    condition_number,
    cross_gram,
    inner,
    metric_norms,
    operator_norm,
    random_unit_vectors,
    renormed_space,
    singular_values,
    spd_power,
    sqrt_spd,
)
from app.services.kaczmarz import (
    ExponentialStream,
    OrbitStream,
    TransformedStream,
    auxiliary_sequence,
    dual_auxiliary_sequence,
    effectiveness_test,
)
from app.services.measures import (
    MeasureSpec,
    exp_matrix,
    fourier_coefficients,
    require_atomic,
    require_probability,
    reweighted,
    space_of,
    total_mass,
)

logger = logging.getLogger(__name__)


class Construction(StrEnum):
    SINGULAR_SHIFT = "SingularShift"
    PERTURBED_CONJUGATE = "PerturbedConjugate"
    MAINSINGULAR = "Mainsingular"
    EXPLICIT = "ExplicitMatrix"


@dataclass(frozen=True, eq=False)
class OrbitOperator:
    map: LinearMap
    construction: Construction
    g0: Vector
    measure: MeasureSpec | None = None
    provenance: dict = field(default_factory=dict)

    @property
    def space(self) -> SpaceDesc:
        return self.map.domain

    def stream(self) -> OrbitStream:
        return OrbitStream(self.map.matrix, self.g0.coords, self.space, label=str(self.construction))

    def orbit(self, horizon: int) -> np.ndarray:
        """Rows T^n g_0 for n = 0..horizon-1."""
        return self.stream().take(horizon)

    def frame_sequence(self) -> FrameSequence:
        return FrameSequence.from_stream(self.stream())


@dataclass(frozen=True, eq=False)
class GenbackwardBundle:
    """V: H -> L²(ν) together with S = V^{-1}(V^{-1})*, S^{±1/2}, U = V S^{1/2} and T."""

    nu: MeasureSpec
    V: LinearMap
    S: LinearMap
    S_half: LinearMap
    S_neg_half: LinearMap
    U: LinearMap
    T: OrbitOperator
    condition: float

    @property
    def H(self) -> SpaceDesc:
        return self.V.domain

    @property
    def L2(self) -> SpaceDesc:
        return self.V.codomain

    def unitarity_defect(self) -> float:
        """‖U*U - I‖ with U* taken between the two metrics."""
        product = adjoint(self.U) @ self.U
        return operator_norm(product - self.H.identity())


# ------------------------------------------------------------- helpers


def multiplication_operator(m: MeasureSpec, n: int = 1, space: SpaceDesc | None = None) -> LinearMap:
    """M_{e^{2πinx}} on L²(μ) of an atomic measure."""
    require_atomic(m)
    s = space or space_of(m)
    return LinearMap(np.diag(exp_matrix(m, [n])[0]), s, s)


def _relative_gap(a: np.ndarray, b: np.ndarray, metric: np.ndarray) -> float:
    scale = max(float(metric_norms(a, metric).max()), float(metric_norms(b, metric).max()), 1e-300)
    return float(metric_norms(a - b, metric).max()) / scale


def _unit_samples(space: SpaceDesc, trials: int, seed: int | None) -> np.ndarray:
    return random_unit_vectors(space, trials, np.random.default_rng(settings.seed if seed is None else seed))


@dataclass(frozen=True)
class HorizonChoice:
    horizon: int
    tail: float
    capped: bool


def converged_horizon(
    op: OrbitOperator,
    start: int | None = None,
    tail_energy: float = 1e-13,
    cap: int | None = None,
) -> HorizonChoice:
    """Double the horizon until Σ_{h/2<=n<h} ‖T^n g_0‖² <= tail_energy.

    ``capped`` is set when the cap (``settings.max_horizon`` by default) was reached
    with the tail still above ``tail_energy``.
    """
    cap = settings.max_horizon if cap is None else cap
    horizon = min(max(start or settings.default_horizon, 2 * op.space.dim), cap)
    stream = op.stream()
    while True:
        rows = stream.take(horizon)
        tail = float(np.sum(metric_norms(rows[horizon // 2 :], op.space.metric) ** 2))
        if tail <= tail_energy:
            logger.debug(f"收敛横向: h={horizon}, tail={tail:.3e}")
            return HorizonChoice(horizon=horizon, tail=tail, capped=False)
        if horizon >= cap:
            logger.warning(f"横向达到上限 {cap} 仍未收敛: tail={tail:.3e}")
            return HorizonChoice(horizon=horizon, tail=tail, capped=True)
        horizon = min(2 * horizon, cap)


def _horizon_for(op: OrbitOperator, horizon: int | None, cap: int | None = None) -> HorizonChoice:
    if horizon is not None:
        return HorizonChoice(horizon=horizon, tail=float("nan"), capped=False)
    return converged_horizon(op, cap=cap)


def _with_horizon_flag(choice: HorizonChoice, defects: dict[str, float], tolerances: dict[str, float]) -> None:
    """A capped horizon search counts as a failed check."""
    defects["horizon_capped"] = float(choice.capped)
    tolerances["horizon_capped"] = 0.0


# --------------------------------------------------------- constructions


def build_singular_shift(nu: MeasureSpec) -> OrbitOperator:
    """L over an atomic probability measure, seed 𝟙.

    Raises:
        NotProbabilityError: ν is not a probability measure.
    """
    require_atomic(nu)
    require_probability(nu)
    s = space_of(nu)
    e1 = exp_matrix(nu, [1])[0]
    ones = np.ones(s.dim, dtype=complex)
    # <f, e_{-1}> = Σ_j p_j e^{2πi x_j} f_j
    matrix = np.diag(e1) - np.outer(ones, nu.masses * e1)
    return OrbitOperator(LinearMap(matrix, s, s), Construction.SINGULAR_SHIFT, Vector(ones, s), nu)


def singular_shift_defect(op: OrbitOperator) -> float:
    """Reproduce L f = e_1 f - <f, e_{-1}> 𝟙 on the coordinate basis."""
    nu = op.measure
    s = op.space
    e1 = Vector(exp_matrix(nu, [1])[0], s)
    e_minus = Vector(exp_matrix(nu, [-1])[0], s)
    worst = 0.0
    for j in range(s.dim):
        basis = Vector(np.eye(s.dim)[j], s)
        expected = e1.coords * basis.coords - inner(basis, e_minus) * np.ones(s.dim)
        worst = max(worst, float(np.abs(op.map.matrix[:, j] - expected).max()))
    return worst


def verify_singular_orbit(nu: MeasureSpec, horizon: int | None = None) -> VerificationReport:
    """L^n 𝟙 against the auxiliary sequence of the exponentials, n < horizon."""
    horizon = settings.default_horizon if horizon is None else horizon
    op = build_singular_shift(nu)
    aux = auxiliary_sequence(ExponentialStream(nu, op.space), horizon - 1, op.space)
    orbit = op.orbit(horizon)
    defects = {
        "orbit_vs_aux": float(metric_norms(orbit - aux.g, op.space.metric).max()),
        "operator_formula": singular_shift_defect(op),
    }
    tolerances = {"orbit_vs_aux": 1e-9, "operator_formula": 1e-12}
    logger.info(f"奇异移位轨道: h={horizon}, defects={defects}")
    return VerificationReport(
        check="singular_orbit",
        horizon=horizon,
        defects=defects,
        tolerances=tolerances,
        details={"atoms": len(nu.atoms)},
    )


def build_perturbed_conjugate(V, nu: MeasureSpec, H: SpaceDesc | None = None) -> GenbackwardBundle:
    """T f = V^{-1} M_e V f - <f, V*(e_{-1})> V^{-1} 𝟙 and the genbackward operators.

    ``V`` maps H into L²(ν); a bare matrix is read with H = L²(ν).

    Raises:
        SingularOperatorError: the condition number of V exceeds ``settings.condition_limit``.
    """
    require_atomic(nu)
    require_probability(nu)
    L2 = space_of(nu)
    if not isinstance(V, LinearMap):
        V = LinearMap(np.asarray(V, dtype=complex), H or L2, L2)
    condition = condition_number(V)
    if not np.isfinite(condition) or condition > settings.condition_limit:
        logger.warning(f"V 奇异或病态: cond={condition:.3e}")
        raise SingularOperatorError(condition, settings.condition_limit)

    H = V.domain
    V_inv = V.inverse()
    M_e = multiplication_operator(nu, 1, L2)
    ones = Vector(np.ones(L2.dim, dtype=complex), L2)
    e_minus = Vector(exp_matrix(nu, [-1])[0], L2)

    g0 = V_inv.apply(ones)
    w = adjoint(V).apply(e_minus)
    # f -> <f, w>_H g0
    rank_one = np.outer(g0.coords, w.coords.conj() @ H.metric)
    T_matrix = (V_inv @ M_e @ V).matrix - rank_one
    T = OrbitOperator(
        LinearMap(T_matrix, H, H),
        Construction.PERTURBED_CONJUGATE,
        g0,
        nu,
        {"condition": condition},
    )

    S = V_inv @ adjoint(V_inv)
    S = LinearMap(0.5 * (S.matrix + adjoint(S).matrix), H, H)
    S_half = sqrt_spd(S)
    S_neg_half = spd_power(S, -0.5)
    U = V @ S_half
    bundle = GenbackwardBundle(nu, V, S, S_half, S_neg_half, U, T, condition)
    logger.info(f"构造扰动共轭: dim={H.dim}, cond(V)={condition:.3e}, ‖U*U-I‖={bundle.unitarity_defect():.3e}")
    return bundle


def conjugate_defect(bundle: GenbackwardBundle) -> float:
    """‖T - V^{-1} L V‖ relative to ‖T‖."""
    L = build_singular_shift(bundle.nu).map
    L = LinearMap(L.matrix, bundle.L2, bundle.L2)
    expected = bundle.V.inverse() @ L @ bundle.V
    diff = bundle.T.map - expected
    return operator_norm(diff) / max(operator_norm(bundle.T.map), 1e-300)


def rank_one_defect(bundle: GenbackwardBundle) -> float:
    """Second singular value of T - V^{-1} M_e V relative to the first."""
    M_e = multiplication_operator(bundle.nu, 1, bundle.L2)
    diff = bundle.T.map - bundle.V.inverse() @ M_e @ bundle.V
    sv = singular_values(diff)
    if sv.size < 2 or sv[0] == 0.0:
        return 0.0
    return float(sv[1] / sv[0])


def build_mainsingular(mu: MeasureSpec, g0) -> OrbitOperator:
    """T f = e_1 f - <e_1 f, 𝟙>_μ g_0.

    Raises:
        PreconditionError: <g_0, 𝟙>_μ differs from 1.
    """
    require_atomic(mu)
    s = space_of(mu)
    g0 = g0 if isinstance(g0, Vector) else Vector(np.asarray(g0, dtype=complex), s)
    normalization = complex(np.sum(mu.masses * g0.coords))
    if abs(normalization - 1.0) > settings.unit_tol:
        logger.warning(f"<g0, 1> = {normalization} != 1")
        raise PreconditionError(f"<g0, 1>_mu = {normalization:.12g}, expected 1", normalization=str(normalization))
    e1 = exp_matrix(mu, [1])[0]
    matrix = np.diag(e1) - np.outer(g0.coords, mu.masses * e1)
    return OrbitOperator(LinearMap(matrix, s, s), Construction.MAINSINGULAR, g0, mu)


def mainsingular_defect(op: OrbitOperator) -> float:
    """Reproduce T f = e_1 f - <e_1 f, 𝟙>_μ g_0 on the coordinate basis."""
    s = op.space
    e1 = exp_matrix(op.measure, [1])[0]
    ones = Vector(np.ones(s.dim), s)
    worst = 0.0
    for j in range(s.dim):
        shifted = Vector(e1 * np.eye(s.dim)[j], s)
        expected = shifted.coords - inner(shifted, ones) * op.g0.coords
        worst = max(worst, float(np.abs(op.map.matrix[:, j] - expected).max()))
    return worst


def tight_seed(mu: MeasureSpec) -> Vector:
    """g_0 = 𝟙/μ([0,1)); its mainsingular orbit is tight with bound 1/μ([0,1))."""
    require_atomic(mu)
    s = space_of(mu)
    return Vector(np.full(s.dim, 1.0 / total_mass(mu), dtype=complex), s)


def _admissible_seed(mu: MeasureSpec, g0: Vector) -> None:
    coords = g0.coords
    if np.any(np.abs(coords.imag) > settings.arithmetic_tol) or np.any(coords.real <= 0.0):
        raise PreconditionError("g0 must be real and strictly positive on every atom")
    normalization = float(np.sum(mu.masses * coords.real))
    if abs(normalization - 1.0) > settings.unit_tol:
        raise PreconditionError(f"<g0, 1>_mu = {normalization:.12g}, expected 1")


# ----------------------------------------------------------- verifiers


def verify_prop_exist(
    mu: MeasureSpec,
    g0,
    horizon: int | None = None,
    trials: int = 4,
    seed: int | None = None,
) -> VerificationReport:
    """g_n built as g_0·h_n (h_n auxiliary over g_0μ) against the mainsingular orbit.

    Also compares the auxiliary sequence of the pair (g_0 e_n, e_n) with the orbit,
    and measures the dextrodual residual f - Σ_{n<h} <f, g_n>_μ e_n on random f.
    """
    horizon = settings.default_horizon if horizon is None else horizon
    require_atomic(mu)
    s = space_of(mu)
    g0 = g0 if isinstance(g0, Vector) else Vector(np.asarray(g0, dtype=complex), s)
    _admissible_seed(mu, g0)

    weighted = reweighted(mu, g0)
    h = auxiliary_sequence(ExponentialStream(weighted), horizon - 1, space_of(weighted))
    product = h.g * g0.coords.real[None, :]

    T = build_mainsingular(mu, g0)
    orbit = T.orbit(horizon)

    exponentials = ExponentialStream(mu, s)
    g0_map = LinearMap(np.diag(g0.coords), s, s)
    pair = dual_auxiliary_sequence(TransformedStream(g0_map, exponentials), exponentials, horizon - 1, s)

    samples = _unit_samples(s, trials, seed)
    coefficients = cross_gram(samples, orbit, s.metric)
    reconstructed = coefficients @ exponentials.take(horizon)
    dextrodual = float(metric_norms(samples - reconstructed, s.metric).max())

    defects = {
        "product_vs_orbit": _relative_gap(product, orbit, s.metric),
        "pair_vs_orbit": _relative_gap(pair.g, orbit, s.metric),
        "dextrodual_residual": dextrodual,
        "operator_formula": mainsingular_defect(T),
    }
    tolerances = {
        "product_vs_orbit": 1e-10,
        "pair_vs_orbit": 1e-9,
        "dextrodual_residual": settings.parseval_tol,
        "operator_formula": 1e-12,
    }
    report = VerificationReport(
        check="prop_exist",
        horizon=horizon,
        defects=defects,
        tolerances=tolerances,
        details={"reweighted_measure": weighted.to_document(), "trials": trials},
    )
    logger.info(f"prop_exist: {defects}")
    return report


def verify_S1_eq_g0(T: OrbitOperator, horizon: int | None = None) -> VerificationReport:
    """S_h 𝟙 against g_0 for a mainsingular orbit, plus the companion identities.

    Without an explicit horizon the orbit is doubled until its frame bounds
    stabilize. Reported defects::

        ‖S𝟙 - g_0‖, ‖S - M_{g_0}‖ (g_0 >= 0), |<S𝟙, 𝟙> - 1|, |<S^{-1}g_0, g_0> - 1|,
        ‖M_{g_0} e_{-1} - S e_{-1}‖, ‖T S_h T* + g_0⊗g_0 - S_h‖
    """
    if T.construction is not Construction.MAINSINGULAR:
        raise PreconditionError("verify_S1_eq_g0 needs an operator from build_mainsingular")
    s = T.space
    choice = _horizon_for(T, horizon)
    horizon = choice.horizon
    rows = T.orbit(horizon)
    S = LinearMap(rows.T @ rows.conj() @ s.metric, s, s)
    ones = Vector(np.ones(s.dim), s)
    g0 = T.g0
    S1 = S.apply(ones)

    defects: dict[str, float] = {
        "s1_minus_g0": (S1 - g0).norm(),
        "s1_dot_1": abs(inner(S1, ones) - 1.0),
        "tst_identity": _tst_identity_defect(T, S),
    }
    tolerances = {
        "s1_minus_g0": 1e-8,
        "s1_dot_1": 1e-9,
        "s_minus_multiplication": 1e-6,
        "s_inv_g0": 1e-9,
        "statement_3": 1e-6,
        "tst_identity": 1e-6,
    }
    _with_horizon_flag(choice, defects, tolerances)
    nonnegative = bool(np.all(np.abs(g0.coords.imag) <= settings.arithmetic_tol) and np.all(g0.coords.real >= 0.0))
    if nonnegative:
        M_g0 = LinearMap(np.diag(g0.coords.real), s, s)
        defects["s_minus_multiplication"] = operator_norm(S - M_g0)
        e_minus = Vector(exp_matrix(T.measure, [-1])[0], s)
        defects["statement_3"] = (M_g0.apply(e_minus) - S.apply(e_minus)).norm()
    try:
        S_inv_g0 = Vector(np.linalg.solve(S.matrix, g0.coords), s)
        defects["s_inv_g0"] = abs(inner(S_inv_g0, g0) - 1.0)
    except np.linalg.LinAlgError:
        defects["s_inv_g0"] = float("inf")

    report = VerificationReport(
        check="S1_eq_g0",
        horizon=horizon,
        defects=defects,
        tolerances=tolerances,
        details={"g0_nonnegative": nonnegative, "horizon_capped": choice.capped},
    )
    logger.info(f"S1=g0: h={horizon}, defects={defects}")
    return report


def _tst_identity_defect(T: OrbitOperator, S: LinearMap) -> float:
    s = T.space
    g0 = T.g0.coords
    rank_one = LinearMap(np.outer(g0, g0.conj() @ s.metric), s, s)
    lhs = T.map @ S @ adjoint(T.map) + rank_one
    return operator_norm(lhs - S)


def tst_identity_defect(T: OrbitOperator, horizon: int) -> float:
    rows = T.orbit(horizon)
    S = LinearMap(rows.T @ rows.conj() @ T.space.metric, T.space, T.space)
    return _tst_identity_defect(T, S)


def genbackward_pair(bundle: GenbackwardBundle) -> tuple[TransformedStream, TransformedStream]:
    """(S^{1/2} U* e_n, S^{-1/2} U* e_n)."""
    exponentials = ExponentialStream(bundle.nu, bundle.L2)
    U_star = adjoint(bundle.U)
    phi = TransformedStream(bundle.S_half @ U_star, exponentials, label="S^1/2 U* e_n")
    psi = TransformedStream(bundle.S_neg_half @ U_star, exponentials, label="S^-1/2 U* e_n")
    return phi, psi


def _gram_comparison_defect(bundle: GenbackwardBundle, orbit: np.ndarray) -> float:
    """max |<S^{-1} g_n, g_k>_H - <h_n, h_k>_ν| relative to the largest entry."""
    count = min(orbit.shape[0], settings.default_horizon)
    g = orbit[:count]
    h = auxiliary_sequence(ExponentialStream(bundle.nu, bundle.L2), count - 1, bundle.L2).g
    S_inv = bundle.S.inverse()
    lhs = cross_gram(g @ S_inv.matrix.T, g, bundle.H.metric)
    rhs = cross_gram(h, h, bundle.L2.metric)
    return float(np.abs(lhs - rhs).max() / max(np.abs(rhs).max(), 1.0))


def verify_genbackward(
    bundle: GenbackwardBundle,
    horizon: int | None = None,
    trials: int | None = None,
    seed: int | None = None,
) -> VerificationReport:
    """The pair auxiliary sequence against T^n g_0, and effectiveness of the pair.

    Also compares <S^{-1} g_n, g_k> with <h_n, h_k>, h_n the auxiliary sequence of the
    exponentials in L²(ν), on the first ``settings.default_horizon`` indices.
    The horizon search is capped at ``settings.recursion_horizon_cap``.
    """
    choice = _horizon_for(bundle.T, horizon, cap=settings.recursion_horizon_cap)
    horizon = choice.horizon
    phi, psi = genbackward_pair(bundle)
    aux = dual_auxiliary_sequence(phi, psi, horizon - 1, bundle.H)
    orbit = bundle.T.orbit(horizon)
    effectiveness = effectiveness_test((phi, psi), bundle.H, trials=trials, n_max=horizon - 1, seed=seed)

    defects = {
        "pair_vs_orbit": _relative_gap(aux.g, orbit, bundle.H.metric),
        "unitarity": bundle.unitarity_defect(),
        "effectiveness_residual": effectiveness.max_residual,
        "recursion": aux.recursion_defect(),
        "gram_vs_exponential_aux": _gram_comparison_defect(bundle, orbit),
    }
    tolerances = {
        "pair_vs_orbit": 1e-8,
        "unitarity": 1e-10,
        "effectiveness_residual": settings.parseval_tol,
        "recursion": settings.arithmetic_tol,
        "gram_vs_exponential_aux": 1e-9 * max(bundle.condition, 1.0),
    }
    _with_horizon_flag(choice, defects, tolerances)
    report = VerificationReport(
        check="genbackward",
        horizon=horizon,
        defects=defects,
        tolerances=tolerances,
        details={
            "effective": effectiveness.verdict is EffectivenessVerdict.EFFECTIVE,
            "verdict": str(effectiveness.verdict),
            "condition": bundle.condition,
            "horizon_capped": choice.capped,
        },
    )
    logger.info(f"genbackward: h={horizon}, defects={defects}")
    return report


def conjugated_shift(bundle: GenbackwardBundle) -> LinearMap:
    """S^{1/2} U* M_e U S^{-1/2} on H."""
    M_e = multiplication_operator(bundle.nu, 1, bundle.L2)
    return bundle.S_half @ adjoint(bundle.U) @ M_e @ bundle.U @ bundle.S_neg_half


def verify_kaczmarzclass(bundle: GenbackwardBundle, horizon: int | None = None, zero_tol: float = 1e-8) -> VerificationReport:
    """Renorming H' = (H, <S^{-1/2}·, S^{-1/2}·>) makes {T^n g_0} Parseval.

    Checks (a) Parseval defect in H', (b) {T^n g_0} equals the classic auxiliary
    sequence of {W^n g_0} in H' with W = S^{1/2} U* M_e U S^{-1/2}, (c) W is
    H-unitary exactly when U S U* commutes with M_{e^{-2πix}}.
    """
    choice = _horizon_for(bundle.T, horizon, cap=settings.recursion_horizon_cap)
    horizon = choice.horizon
    H = bundle.H
    H_prime = renormed_space(H, bundle.S)
    orbit = bundle.T.orbit(horizon)

    renormed = FrameSequence.explicit(orbit, H_prime)
    report_prime = frames.frame_bounds(renormed, horizon)
    parseval = max(abs(report_prime.lower_bound - 1.0), abs(report_prime.upper_bound - 1.0))

    W = conjugated_shift(bundle)
    W_prime = LinearMap(W.matrix, H_prime, H_prime)
    aux = auxiliary_sequence(OrbitStream(W.matrix, bundle.T.g0.coords, H_prime, label="W^n g0"), horizon - 1, H_prime)
    aux_gap = _relative_gap(aux.g, orbit, H_prime.metric)

    unitarity = operator_norm(adjoint(W) @ W - H.identity())
    unitarity_prime = operator_norm(adjoint(W_prime) @ W_prime - H_prime.identity())
    USU = bundle.U @ bundle.S @ adjoint(bundle.U)
    M_inv = multiplication_operator(bundle.nu, -1, bundle.L2)
    commutator = operator_norm(USU @ M_inv - M_inv @ USU)
    mismatch = float((unitarity <= zero_tol) != (commutator <= zero_tol))

    defects = {
        "parseval_in_renormed": parseval,
        "aux_vs_orbit": aux_gap,
        "unitary_in_renormed": unitarity_prime,
        "equivalence_mismatch": mismatch,
    }
    tolerances = {
        "parseval_in_renormed": settings.parseval_tol,
        "aux_vs_orbit": 1e-8,
        "unitary_in_renormed": 1e-8,
        "equivalence_mismatch": 0.0,
    }
    _with_horizon_flag(choice, defects, tolerances)
    report = VerificationReport(
        check="kaczmarzclass",
        horizon=horizon,
        defects=defects,
        tolerances=tolerances,
        details={
            "unitarity_defect": unitarity,
            "commutator_norm": commutator,
            "unitary_in_H": unitarity <= zero_tol,
            "commutes": commutator <= zero_tol,
            "horizon_capped": choice.capped,
        },
    )
    logger.info(f"kaczmarzclass: unitarity={unitarity:.3e}, commutator={commutator:.3e}, parseval={parseval:.3e}")
    return report


def verify_tform(
    bundle: GenbackwardBundle,
    horizon: int | None = None,
    trials: int = 10,
    seed: int | None = None,
) -> VerificationReport:
    """Frame identity Σ|<f, T^n g_0>|² = ‖(V^{-1})* f‖² and bounds vs eig(S).

    Without an explicit horizon the orbit is doubled until its bounds stabilize.
    """
    fs = bundle.T.frame_sequence()
    choice = _horizon_for(bundle.T, horizon)
    horizon = choice.horizon
    report = frames.frame_bounds(fs, horizon)
    H = bundle.H
    orbit = bundle.T.orbit(horizon)

    samples = _unit_samples(H, trials, seed)
    energy = np.sum(np.abs(cross_gram(samples, orbit, H.metric)) ** 2, axis=1)
    V_inv_star = adjoint(bundle.V.inverse())
    targets = metric_norms(samples @ V_inv_star.matrix.T, bundle.L2.metric) ** 2
    identity_gap = float(np.abs(energy - targets).max())

    eigenvalues = np.linalg.eigvalsh(0.5 * (bundle.S.whitened() + bundle.S.whitened().conj().T))
    lower_gap = abs(report.lower_bound - eigenvalues[0]) / eigenvalues[0]
    upper_gap = abs(report.upper_bound - eigenvalues[-1]) / eigenvalues[-1]
    S_h = frames.frame_operator(fs, horizon)

    defects = {
        "frame_identity": identity_gap,
        "lower_bound_rel": lower_gap,
        "upper_bound_rel": upper_gap,
        "frame_operator": operator_norm(S_h - bundle.S),
        "rank_one": rank_one_defect(bundle),
        "conjugate_formula": conjugate_defect(bundle),
    }
    tolerances = {
        "frame_identity": 1e-6,
        "lower_bound_rel": 1e-4,
        "upper_bound_rel": 1e-4,
        "frame_operator": 1e-6,
        "rank_one": 1e-10,
        "conjugate_formula": 1e-12 * max(bundle.condition, 1.0),
    }
    _with_horizon_flag(choice, defects, tolerances)
    return VerificationReport(
        check="tform",
        horizon=horizon,
        defects=defects,
        tolerances=tolerances,
        details={
            "lower_bound": report.lower_bound,
            "upper_bound": report.upper_bound,
            "tail_indicator": report.tail_indicator,
            "expected_bounds": [float(eigenvalues[0]), float(eigenvalues[-1])],
            "is_frame": report.has(FrameClass.FRAME),
            "horizon_capped": choice.capped,
        },
    )


@dataclass(frozen=True, eq=False)
class DextrodualResult:
    sequence: FrameSequence
    growth: GrowthCurve
    report: VerificationReport


def dextrodual_orbit(
    bundle: GenbackwardBundle,
    horizon: int | None = None,
    growth_horizon: int = 2000,
    trials: int = 4,
    seed: int | None = None,
) -> DextrodualResult:
    """The dual orbit ℳ^n(S^{-1/2}U*𝟙), ℳ = S^{-1/2}U* M_e U S^{1/2}, and its Bessel growth.

    B(M) = Σ_{n<=M} |<S^{1/2}U*𝟙, S^{-1/2}U*e_n>|² is computed directly and
    through |ν̂(n)|²; it grows linearly for atomic ν, so the dual orbit is not Bessel.
    """
    horizon = settings.default_horizon if horizon is None else horizon
    H, L2 = bundle.H, bundle.L2
    U_star = adjoint(bundle.U)
    M_e = multiplication_operator(bundle.nu, 1, L2)
    script_m = bundle.S_neg_half @ U_star @ M_e @ bundle.U @ bundle.S_half
    ones = np.ones(L2.dim, dtype=complex)
    dual_seed = (bundle.S_neg_half @ U_star).matrix @ ones
    dual = OrbitStream(script_m.matrix, dual_seed, H, label="dual orbit")

    samples = _unit_samples(H, trials, seed)
    orbit = bundle.T.orbit(horizon)
    coefficients = cross_gram(samples, orbit, H.metric)
    reconstruction = coefficients @ dual.take(horizon)
    residual = float(metric_norms(samples - reconstruction, H.metric).max())

    phi_one = (bundle.S_half @ U_star).matrix @ ones
    _, psi = genbackward_pair(bundle)
    direct = np.abs(cross_gram(phi_one[None, :], psi.take(growth_horizon + 1), H.metric)[0]) ** 2
    via_fourier = np.abs(fourier_coefficients(bundle.nu, np.arange(growth_horizon + 1))) ** 2
    cumulative = np.cumsum(direct)
    M_values = np.arange(growth_horizon + 1)
    tail = M_values >= max(growth_horizon // 2, 1)
    min_ratio = float(np.min(cumulative[tail] / M_values[tail]))
    growth = GrowthCurve(
        points=[(int(m), float(b)) for m, b in zip(M_values, cumulative)],
        min_ratio_tail=min_ratio,
    )

    report = VerificationReport(
        check="dextrodual_orbit",
        horizon=horizon,
        defects={
            "reconstruction": residual,
            "growth_two_ways": float(np.abs(cumulative - np.cumsum(via_fourier)).max() / max(cumulative[-1], 1.0)),
        },
        tolerances={"reconstruction": settings.parseval_tol, "growth_two_ways": 1e-9},
        details={"B_final": float(cumulative[-1]), "min_ratio_tail": min_ratio, "growth_horizon": growth_horizon},
    )
    return DextrodualResult(FrameSequence.from_stream(dual), growth, report)


def explore_signed_seeds(
    mu: MeasureSpec,
    trials: int = 8,
    seed: int | None = None,
    horizon: int = 400,
    spread: float = 2.0,
) -> VerificationReport:
    """Search real seeds g_0 with <g_0, 𝟙> = 1 that change sign.

    Records the spectral radius of T, truncated frame bounds of the orbit and the
    dextrodual residual. Records are labelled exploratory and carry no verdict.
    """
    require_atomic(mu)
    s = space_of(mu)
    if s.dim < 2:
        raise InvalidMeasureError("sign changes need at least two atoms")
    rng = np.random.default_rng(settings.seed if seed is None else seed)
    base = np.full(s.dim, 1.0 / total_mass(mu))
    samples = _unit_samples(s, 4, seed)
    exponentials = ExponentialStream(mu, s)
    records = []
    for trial in range(trials):
        delta = rng.standard_normal(s.dim)
        delta -= np.sum(mu.masses * delta) / total_mass(mu)
        # 最负的坐标落在 (1 - spread)·base，spread > 1 时必然变号
        delta *= spread * base.max() / max(-delta.min(), 1e-300)
        g0 = base + delta
        T = build_mainsingular(mu, g0)
        radius = float(np.abs(np.linalg.eigvals(T.map.matrix)).max())
        record = {"trial": trial, "g0": g0.tolist(), "spectral_radius": radius, "sign_change": bool(np.any(g0 < 0))}
        if radius < 1.0:
            fs = T.frame_sequence()
            bounds = frames.frame_bounds(fs, horizon)
            orbit = T.orbit(horizon)
            coefficients = cross_gram(samples, orbit, s.metric)
            residual = metric_norms(samples - coefficients @ exponentials.take(horizon), s.metric).max()
            record.update(
                lower_bound=bounds.lower_bound,
                upper_bound=bounds.upper_bound,
                tail_indicator=bounds.tail_indicator,
                dextrodual_residual=float(residual),
            )
        else:
            record["status"] = "divergent"
        records.append(record)
    logger.info(f"符号种子探索: {len(records)} 条记录 (exploratory)")
    return VerificationReport(
        check="signed_seed_search",
        horizon=horizon,
        defects={},
        tolerances={},
        details={"records": records, "label": "exploratory"},
        exploratory=True,
    )

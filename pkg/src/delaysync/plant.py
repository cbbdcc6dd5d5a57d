"""Agent-model validation and controller synthesis.

Given an identical-agent model (A, B, C), this module builds everything
the protocol needs that depends on the model alone: the feasible
constant-reference set, a regulator-equation solution satisfying the
rank condition (with recursive repair when the initial solve violates
it), the integrating precompensator, the compensated model and the
stabilizing state-feedback / observer gains.  Nothing here depends on
the communication graph or the network size.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from . import numerics
from .errors import (
    InfeasibleReferenceError,
    ModelAssumptionError,
    SynthesisIntegrityError,
)

__all__ = [
    "AgentModel",
    "ModelCheckReport",
    "RegulatorSolution",
    "Precompensator",
    "CompensatedModel",
    "GainPair",
    "SynthesisResult",
    "check_assumption1",
    "check_stabilizable",
    "check_detectable",
    "compute_yr_basis",
    "check_right_invertible_no_zero_at_one",
    "solve_regulator",
    "enforce_rank_condition",
    "build_precompensator",
    "compensate",
    "synthesize",
    "load_model",
    "synthesis_to_json",
    "synthesis_from_json",
]

#: Least-squares residual below which a reference column counts as feasible.
MEMBERSHIP_TOL = 1e-8

#: Residual bound the regulator-equation solution must meet.
RESIDUAL_TOL = 1e-9

#: Eigenvalue-modulus slack for the "closed unit disc" test.
UNIT_DISC_SLACK = 1e-9


@dataclass(frozen=True)
class AgentModel:
    """The agent triple (A, B, C): x+ = Ax + Bu, y = Cx."""

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "A", numerics.as_matrix(self.A, "A"))
        object.__setattr__(self, "B", numerics.as_matrix(self.B, "B"))
        object.__setattr__(self, "C", numerics.as_matrix(self.C, "C"))
        n = self.A.shape[0]
        if self.A.shape[1] != n:
            raise ValueError(f"A must be square, got {self.A.shape}")
        if self.B.shape[0] != n:
            raise ValueError(f"B has {self.B.shape[0]} rows, expected {n}")
        if self.C.shape[1] != n:
            raise ValueError(f"C has {self.C.shape[1]} cols, expected {n}")

    @property
    def n(self):
        return self.A.shape[0]

    @property
    def m(self):
        return self.B.shape[1]

    @property
    def p(self):
        return self.C.shape[0]


@dataclass(frozen=True)
class ModelCheckReport:
    """Outcome of the ingestion checks on an agent model."""

    assumption1: bool
    worst_modulus: float
    stabilizable: bool
    detectable: bool

    @property
    def ok(self):
        return self.assumption1 and self.stabilizable and self.detectable

    def raise_on_failure(self):
        if not self.assumption1:
            raise ModelAssumptionError(
                "eigenvalue-bound assumption failed: A has an eigenvalue of "
                f"modulus {self.worst_modulus:.6g} > 1"
            )
        if not self.stabilizable:
            raise ModelAssumptionError("(A, B) is not stabilizable")
        if not self.detectable:
            raise ModelAssumptionError("(A, C) is not detectable")


def check_assumption1(model):
    """All eigenvalues of A inside the closed unit disc.

    Returns ``(ok, worst_modulus)``; a small slack absorbs rounding of
    eigenvalues that sit exactly on the circle.
    """
    moduli = np.abs(numerics.eigenvalues(model.A))
    worst = float(moduli.max()) if moduli.size else 0.0
    return worst <= 1.0 + UNIT_DISC_SLACK, worst


def check_stabilizable(A, B, rtol=None):
    """PBH stabilizability of (A, B)."""
    return numerics.is_stabilizable(A, B, rtol)


def check_detectable(A, C, rtol=None):
    """PBH detectability of (A, C)."""
    return numerics.is_detectable(A, C, rtol)


def validate_model(model, rtol=None):
    """Run all ingestion checks, returning a ModelCheckReport."""
    a1, worst = check_assumption1(model)
    return ModelCheckReport(
        assumption1=a1,
        worst_modulus=worst,
        stabilizable=check_stabilizable(model.A, model.B, rtol),
        detectable=check_detectable(model.A, model.C, rtol),
    )


def _regulator_lhs(model):
    # [[A - I, B], [C, 0]], the map (x, u) -> ((A-I)x + Bu, Cx)
    n, m, p = model.n, model.m, model.p
    return np.block(
        [[model.A - np.eye(n), model.B], [model.C, np.zeros((p, m))]]
    )


def compute_yr_basis(model, rtol=None):
    """Orthonormal basis of the feasible constant-reference set.

    A constant output y is trackable at equilibrium iff some (x, u)
    solves (A - I)x + Bu = 0 with Cx = y.  The basis is obtained from
    the kernel of [A - I, B]: project kernel vectors onto their state
    block, push through C and column-reduce.  Zero columns (only y = 0
    feasible) is a legal result.
    """
    n = model.n
    null = numerics.kernel_basis(np.hstack([model.A - np.eye(n), model.B]), rtol)
    if null.shape[1] == 0:
        return np.zeros((model.p, 0))
    return numerics.image_basis(model.C @ null[:n, :], rtol)


def check_right_invertible_no_zero_at_one(model, rtol=None):
    """True iff rank [[A - I, B], [C, 0]] = n + p and the same pencil has
    full row rank at a generic point z.

    Full rank at z = 1 rules out an invariant zero at one; full rank at
    a generic z (away from eigenvalues) certifies right invertibility.
    """
    n, m, p = model.n, model.m, model.p
    if numerics.rank_of(_regulator_lhs(model), rtol) < n + p:
        return False
    z = _generic_probe_point(model.A)
    pencil = np.block(
        [
            [model.A - z * np.eye(n), model.B.astype(complex)],
            [model.C.astype(complex), np.zeros((p, m))],
        ]
    )
    return numerics.rank_of(pencil, rtol) == n + p


def _generic_probe_point(A):
    # Deterministic pseudo-random complex point off the eigenvalue locus.
    eigs = numerics.eigenvalues(A)
    rng = np.random.default_rng(271828)
    for _ in range(64):
        z = complex(rng.uniform(1.1, 2.0) * np.exp(1j * rng.uniform(0, 2 * np.pi)))
        if eigs.size == 0 or np.min(np.abs(eigs - z)) > 1e-6:
            return z
    raise SynthesisIntegrityError("could not find a generic probe point")


@dataclass(frozen=True)
class RegulatorSolution:
    """Solution (Pi, Gamma) of the regulator equations for target basis R:

        (A - I) Pi + B Gamma = 0,   C Pi = R
    """

    R: np.ndarray
    Pi: np.ndarray
    Gamma: np.ndarray

    def residuals(self, model):
        state_res = (model.A - np.eye(model.n)) @ self.Pi + model.B @ self.Gamma
        output_res = model.C @ self.Pi - self.R
        return float(np.abs(state_res).max(initial=0.0)), float(
            np.abs(output_res).max(initial=0.0)
        )

    def rank_condition_holds(self, model, rtol=None):
        M = _rank_condition_matrix(model, self.Gamma)
        return numerics.rank_of(M, rtol) == model.n + numerics.rank_of(self.Gamma, rtol)

    def validate(self, model, rtol=None, residual_tol=RESIDUAL_TOL):
        s, o = self.residuals(model)
        scale = 1.0 + float(np.abs(self.R).max(initial=0.0))
        if s > residual_tol * scale or o > residual_tol * scale:
            raise SynthesisIntegrityError(
                f"regulator residuals too large: state {s:.3e}, output {o:.3e}"
            )
        if not self.rank_condition_holds(model, rtol):
            raise SynthesisIntegrityError("regulator rank condition violated")


def _rank_condition_matrix(model, Gamma):
    q = Gamma.shape[1]
    return np.block(
        [
            [model.A - np.eye(model.n), model.B @ Gamma],
            [model.C, np.zeros((model.p, q))],
        ]
    )


def solve_regulator(model, R, rtol=None, membership_tol=MEMBERSHIP_TOL):
    """Solve the regulator equations for a feasible target basis R.

    Parameters
    ----------
    model : AgentModel
    R : (p, q) array
        Columns must lie in the feasible reference set; membership is
        certified by the least-squares residual of the stacked system.

    Returns
    -------
    RegulatorSolution
        Minimum-norm solution, post-processed so the rank condition
        rank [[A - I, B Gamma], [C, 0]] = n + rank(Gamma) holds.
    """
    R = numerics.as_matrix(R, "R")
    if R.shape[0] != model.p:
        raise ValueError(f"R has {R.shape[0]} rows, expected p = {model.p}")
    n = model.n
    S = _regulator_lhs(model)
    rhs = np.vstack([np.zeros((n, R.shape[1])), R])
    sol, *_ = np.linalg.lstsq(S, rhs, rcond=None)
    resid = S @ sol - rhs
    scale = 1.0 + float(np.abs(R).max(initial=0.0))
    col_res = np.abs(resid).max(axis=0, initial=0.0)
    worst = int(np.argmax(col_res)) if col_res.size else 0
    if col_res.size and col_res[worst] > membership_tol * scale:
        raise InfeasibleReferenceError(
            f"column {worst} of R is not a feasible constant reference "
            f"(residual {col_res[worst]:.3e})",
            distance=float(col_res[worst]),
            component=worst,
        )
    Pi, Gamma = sol[:n], sol[n:]
    sol_scale = float(np.abs(sol).max(initial=0.0))
    Pi, Gamma = enforce_rank_condition(model, Pi, Gamma, rtol, scale=sol_scale)
    out = RegulatorSolution(R=R, Pi=Pi, Gamma=Gamma)
    out.validate(model, rtol)
    return out


def enforce_rank_condition(model, Pi, Gamma, rtol=None, scale=None):
    """Recursively lower rank(Gamma) until the rank condition holds.

    Each pass finds a kernel vector (x, v) of [[A - I, B Gamma], [C, 0]]
    with B Gamma v != 0 and ||v|| = 1, then replaces

        Pi    <- Pi - x v',    Gamma <- Gamma (I - v v')

    which preserves the regulator equations and strictly lowers
    rank(Gamma), so the loop runs at most q times.  Singular values of
    Gamma negligible at the solution scale are truncated to exact zeros
    so the rank bookkeeping cannot be fooled by round-off debris.
    """
    Pi = np.array(Pi, dtype=float, copy=True)
    Gamma = np.array(Gamma, dtype=float, copy=True)
    q = Gamma.shape[1]
    if q == 0:
        return Pi, Gamma
    if scale is None:
        scale = max(float(np.abs(Pi).max(initial=0.0)),
                    float(np.abs(Gamma).max(initial=0.0)))
    # debris floor: far below the rank cutoff, far above round-off
    chop = 1e-12 * max(scale, 1e-300)
    Gamma = _truncate_singular_values(Gamma, chop)
    for _ in range(q + 1):
        gamma_rank = numerics.rank_of(Gamma, rtol)
        M = _rank_condition_matrix(model, Gamma)
        if numerics.rank_of(M, rtol) == model.n + gamma_rank:
            return Pi, Gamma
        kern = numerics.kernel_basis(M, rtol)
        BG = model.B @ Gamma
        pick = None
        for col in kern.T:
            v = col[model.n :]
            if np.linalg.norm(BG @ v) > 1e-10 * (1.0 + np.abs(BG).max(initial=0.0)):
                pick = col
                break
        if pick is None:
            raise SynthesisIntegrityError(
                "rank condition violated but no reducing kernel direction exists"
            )
        v = pick[model.n :]
        x = pick[: model.n] / np.linalg.norm(v)
        v = v / np.linalg.norm(v)
        Pi = Pi - np.outer(x, v)
        Gamma = _truncate_singular_values(
            Gamma @ (np.eye(q) - np.outer(v, v)), chop
        )
        if numerics.rank_of(Gamma, rtol) >= gamma_rank:
            raise SynthesisIntegrityError("rank-reduction pass failed to lower rank")
    raise SynthesisIntegrityError("rank-condition repair did not terminate")


def _truncate_singular_values(G, floor):
    U, sv, Vt = np.linalg.svd(G, full_matrices=False)
    if not np.any((sv > 0) & (sv <= floor)):
        return G
    sv = np.where(sv > floor, sv, 0.0)
    return (U * sv) @ Vt


@dataclass(frozen=True)
class Precompensator:
    """Input-side integrator data: u = Gamma1 p + [Gamma2 0] v.

    Gamma1 is injective with the same image as Gamma (v = rank Gamma
    columns); Gamma2 completes it to an invertible m x m transform.
    """

    Gamma1: np.ndarray
    Gamma2: np.ndarray

    @property
    def v(self):
        return self.Gamma1.shape[1]

    @property
    def m(self):
        return self.Gamma1.shape[0]

    def validate(self, Gamma, rtol=None):
        v = numerics.rank_of(Gamma, rtol)
        if self.Gamma1.shape[1] != v:
            raise SynthesisIntegrityError(
                f"Gamma1 has {self.Gamma1.shape[1]} columns, expected rank(Gamma) = {v}"
            )
        if numerics.rank_of(self.Gamma1, rtol) != v:
            raise SynthesisIntegrityError("Gamma1 is not injective")
        stacked = np.hstack([self.Gamma1, Gamma])
        if numerics.rank_of(stacked, rtol) != v:
            raise SynthesisIntegrityError("im(Gamma1) != im(Gamma)")
        square = np.hstack([self.Gamma1, self.Gamma2])
        if square.shape[0] != square.shape[1] or numerics.rank_of(square, rtol) != self.m:
            raise SynthesisIntegrityError("[Gamma1 Gamma2] is not invertible")

    def input_from(self, p_state, v_input):
        """Realize u = Gamma1 p + [Gamma2 0] v."""
        mv = self.m - self.v
        return self.Gamma1 @ p_state + self.Gamma2 @ v_input[:mv]

    def integrator_drive(self, v_input):
        """The [0 I] v component feeding the integrator state."""
        return v_input[self.m - self.v :]


def build_precompensator(Gamma, rtol=None):
    """Orthonormal Gamma1 (image of Gamma) and Gamma2 (its complement).

    The stacked [Gamma1 Gamma2] is orthogonal, hence invertible with
    perfect conditioning.  rank(Gamma) = 0 degenerates to an empty
    integrator and a static input transform u = Gamma2 v.
    """
    Gamma = numerics.as_matrix(Gamma, "Gamma")
    m = Gamma.shape[0]
    Gamma1 = numerics.image_basis(Gamma, rtol)
    Gamma2 = numerics.kernel_basis(Gamma1.T, rtol) if Gamma1.shape[1] < m else np.zeros(
        (m, 0)
    )
    return Precompensator(Gamma1=Gamma1, Gamma2=Gamma2)


@dataclass(frozen=True)
class CompensatedModel:
    """Agent model extended with the integrating precompensator.

    Abar = [[A, B Gamma1], [0, I]],  Bbar = [[B Gamma2, 0], [0, I]],
    Cbar = [C, 0];  PiBar = [Pi; W] with Gamma1 W = Gamma satisfies
    Abar PiBar = PiBar and Cbar PiBar = R.
    """

    Abar: np.ndarray
    Bbar: np.ndarray
    Cbar: np.ndarray
    PiBar: np.ndarray
    W: np.ndarray

    @property
    def dim(self):
        return self.Abar.shape[0]


def compensate(model, pre, reg, rtol=None, residual_tol=RESIDUAL_TOL):
    """Assemble the compensated model and verify its synthesis identities.

    The fixed-point and output identities on PiBar, plus stabilizability
    and detectability of the compensated pair, hold by construction; a
    failure here signals a numerical bug and raises
    ``SynthesisIntegrityError``.
    """
    n, m, v = model.n, model.m, pre.v
    Abar = np.block(
        [[model.A, model.B @ pre.Gamma1], [np.zeros((v, n)), np.eye(v)]]
    )
    Bbar = np.block(
        [
            [model.B @ pre.Gamma2, np.zeros((n, v))],
            [np.zeros((v, m - v)), np.eye(v)],
        ]
    )
    Cbar = np.hstack([model.C, np.zeros((model.p, v))])
    # Gamma1 is injective, so Gamma1 W = Gamma has the unique solution below.
    W, *_ = np.linalg.lstsq(pre.Gamma1, reg.Gamma, rcond=None)
    if np.abs(pre.Gamma1 @ W - reg.Gamma).max(initial=0.0) > residual_tol * (
        1.0 + np.abs(reg.Gamma).max(initial=0.0)
    ):
        raise SynthesisIntegrityError("Gamma1 W = Gamma is not solvable")
    PiBar = np.vstack([reg.Pi, W])
    scale = 1.0 + float(np.abs(PiBar).max(initial=0.0))
    if np.abs(Abar @ PiBar - PiBar).max(initial=0.0) > residual_tol * scale:
        raise SynthesisIntegrityError("Abar PiBar = PiBar failed")
    if np.abs(Cbar @ PiBar - reg.R).max(initial=0.0) > residual_tol * scale:
        raise SynthesisIntegrityError("Cbar PiBar = R failed")
    if not check_stabilizable(Abar, Bbar, rtol):
        raise SynthesisIntegrityError("compensated pair (Abar, Bbar) not stabilizable")
    if not check_detectable(Abar, Cbar, rtol):
        raise SynthesisIntegrityError("compensated pair (Abar, Cbar) not detectable")
    return CompensatedModel(Abar=Abar, Bbar=Bbar, Cbar=Cbar, PiBar=PiBar, W=W)


@dataclass(frozen=True)
class GainPair:
    """State-feedback and observer gains for the compensated model."""

    K: np.ndarray
    F: np.ndarray

    def closed_loop_radii(self, comp):
        rho_k = numerics.spectral_radius(comp.Abar - comp.Bbar @ self.K)
        rho_f = numerics.spectral_radius(comp.Abar - self.F @ comp.Cbar)
        return rho_k, rho_f

    def validate(self, comp):
        rho_k, rho_f = self.closed_loop_radii(comp)
        if rho_k >= 1.0:
            raise ModelAssumptionError(
                f"Abar - Bbar K is not Schur stable (rho = {rho_k:.6g})"
            )
        if rho_f >= 1.0:
            raise ModelAssumptionError(
                f"Abar - F Cbar is not Schur stable (rho = {rho_f:.6g})"
            )


@dataclass(frozen=True)
class SynthesisResult:
    """Everything the protocol needs, derived from the model alone."""

    model: AgentModel
    R: np.ndarray
    y_r: np.ndarray
    z: np.ndarray
    reg: RegulatorSolution
    pre: Precompensator
    comp: CompensatedModel
    gains: GainPair
    tolerances: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.model.n

    @property
    def m(self):
        return self.model.m

    @property
    def p(self):
        return self.model.p

    @property
    def v(self):
        return self.pre.v

    @property
    def dim(self):
        return self.comp.dim


def synthesize(model, y_r, rtol=None, gains=None):
    """End-to-end synthesis from the agent model and a constant reference.

    Parameters
    ----------
    model : AgentModel
    y_r : (p,) array
        Requested constant reference output.
    gains : GainPair, optional
        Externally supplied gains; accepted after a Schur check instead
        of running the Riccati design.

    Raises
    ------
    ModelAssumptionError
        Model fails an ingestion check (or supplied gains fail Schur).
    InfeasibleReferenceError
        y_r lies outside the feasible reference set.
    """
    if rtol is None:
        rtol = numerics.default_rank_tolerance()
    validate_model(model, rtol).raise_on_failure()
    y_r = np.asarray(y_r, dtype=float).reshape(-1)
    if y_r.shape[0] != model.p:
        raise ValueError(f"y_r has length {y_r.shape[0]}, expected p = {model.p}")

    right_inv = check_right_invertible_no_zero_at_one(model, rtol)
    R = np.eye(model.p) if right_inv else compute_yr_basis(model, rtol)

    if R.shape[1] == 0:
        z = np.zeros(0)
        dist = float(np.abs(y_r).max(initial=0.0))
    else:
        z, *_ = np.linalg.lstsq(R, y_r.reshape(-1, 1), rcond=None)
        z = z.reshape(-1)
        dist = float(np.abs(R @ z - y_r).max(initial=0.0))
    scale = 1.0 + float(np.abs(y_r).max(initial=0.0))
    if dist > MEMBERSHIP_TOL * scale:
        offender = int(np.argmax(np.abs(R @ z - y_r))) if R.shape[1] else int(
            np.argmax(np.abs(y_r))
        )
        raise InfeasibleReferenceError(
            f"y_r is not a feasible constant reference: component {offender} "
            f"is {dist:.6g} away from the feasible set",
            distance=dist,
            component=offender,
        )

    reg = solve_regulator(model, R, rtol)
    pre = build_precompensator(reg.Gamma, rtol)
    pre.validate(reg.Gamma, rtol)
    comp = compensate(model, pre, reg, rtol)
    if gains is None:
        K = numerics.design_stabilizing_gain(comp.Abar, comp.Bbar, rtol)
        F = numerics.design_observer_gain(comp.Abar, comp.Cbar, rtol)
        gains = GainPair(K=K, F=F)
    gains.validate(comp)

    a1, worst = check_assumption1(model)
    rho_k, rho_f = gains.closed_loop_radii(comp)
    return SynthesisResult(
        model=model,
        R=R,
        y_r=y_r,
        z=z,
        reg=reg,
        pre=pre,
        comp=comp,
        gains=gains,
        tolerances={
            "rank_rtol": rtol,
            "membership_tol": MEMBERSHIP_TOL,
            "residual_tol": RESIDUAL_TOL,
        },
        checks={
            "assumption1": a1,
            "worst_eigenvalue_modulus": worst,
            "stabilizable": True,
            "detectable": True,
            "right_invertible_no_zero_at_one": bool(right_inv),
            "closed_loop_radius_state": rho_k,
            "closed_loop_radius_observer": rho_f,
        },
    )


# ---------------------------------------------------------------------------
# JSON interfaces


def load_model(source, validate=True):
    """Agent model from a JSON file path or an already-parsed dict.

    Schema: {"A": [[...]], "B": [[...]], "C": [[...]]}.  Ingestion
    enforces the model checks (eigenvalue bound, stabilizability,
    detectability) unless ``validate`` is false.
    """
    doc = _load_json(source)
    try:
        model = AgentModel(A=doc["A"], B=doc["B"], C=doc["C"])
    except KeyError as exc:
        raise ValueError(f"model document is missing key {exc}")
    if validate:
        validate_model(model).raise_on_failure()
    return model


def _load_json(source):
    if isinstance(source, dict):
        return source
    with open(source, "r", encoding="utf-8") as fh:
        return json.load(fh)


def _tolist(M):
    return np.asarray(M, dtype=float).tolist()


def _veclist(v):
    return np.asarray(v, dtype=float).reshape(-1).tolist()


def synthesis_to_json(result):
    """Serialize a SynthesisResult to a JSON-compatible dict."""
    return {
        "format": "delaysync-protocol/1",
        "model": {
            "A": _tolist(result.model.A),
            "B": _tolist(result.model.B),
            "C": _tolist(result.model.C),
        },
        "reference": {
            "R": _tolist(result.R),
            "y_r": _veclist(result.y_r),
            "z": _veclist(result.z),
        },
        "regulator": {"Pi": _tolist(result.reg.Pi), "Gamma": _tolist(result.reg.Gamma)},
        "precompensator": {
            "Gamma1": _tolist(result.pre.Gamma1),
            "Gamma2": _tolist(result.pre.Gamma2),
            "v": result.pre.v,
        },
        "compensated": {
            "Abar": _tolist(result.comp.Abar),
            "Bbar": _tolist(result.comp.Bbar),
            "Cbar": _tolist(result.comp.Cbar),
            "PiBar": _tolist(result.comp.PiBar),
            "W": _tolist(result.comp.W),
        },
        "gains": {"K": _tolist(result.gains.K), "F": _tolist(result.gains.F)},
        "tolerances": dict(result.tolerances),
        "checks": dict(result.checks),
    }


def synthesis_from_json(source):
    """Rebuild a SynthesisResult from its JSON form.

    Dimensional consistency is enforced; the Schur property of the
    stored gains is *not* re-imposed here so that deliberately broken
    protocol files can still be loaded and fed to the verification
    scans (which will then report the failure).
    """
    doc = _load_json(source)
    model = load_model(doc["model"], validate=False)
    reg = RegulatorSolution(
        R=numerics.as_matrix(doc["reference"]["R"], "R"),
        Pi=numerics.as_matrix(doc["regulator"]["Pi"], "Pi"),
        Gamma=numerics.as_matrix(doc["regulator"]["Gamma"], "Gamma"),
    )
    pre_doc = doc["precompensator"]
    m, v = model.m, int(pre_doc["v"])
    Gamma1 = np.asarray(pre_doc["Gamma1"], dtype=float).reshape(m, v)
    Gamma2 = np.asarray(pre_doc["Gamma2"], dtype=float).reshape(m, m - v)
    pre = Precompensator(Gamma1=Gamma1, Gamma2=Gamma2)
    comp_doc = doc["compensated"]
    q = reg.R.shape[1]
    comp = CompensatedModel(
        Abar=numerics.as_matrix(comp_doc["Abar"], "Abar"),
        Bbar=np.asarray(comp_doc["Bbar"], dtype=float).reshape(model.n + v, m),
        Cbar=numerics.as_matrix(comp_doc["Cbar"], "Cbar"),
        PiBar=np.asarray(comp_doc["PiBar"], dtype=float).reshape(model.n + v, q),
        W=np.asarray(comp_doc["W"], dtype=float).reshape(v, q),
    )
    gains = GainPair(
        K=np.asarray(doc["gains"]["K"], dtype=float).reshape(m, model.n + v),
        F=np.asarray(doc["gains"]["F"], dtype=float).reshape(model.n + v, model.p),
    )
    y_r = np.asarray(doc["reference"]["y_r"], dtype=float).reshape(-1)
    z = np.asarray(doc["reference"]["z"], dtype=float).reshape(-1)
    return SynthesisResult(
        model=model,
        R=reg.R,
        y_r=y_r,
        z=z,
        reg=reg,
        pre=pre,
        comp=comp,
        gains=gains,
        tolerances=dict(doc.get("tolerances", {})),
        checks=dict(doc.get("checks", {})),
    )

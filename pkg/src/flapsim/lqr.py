"""Hover linearization and infinite-horizon continuous LQR synthesis.

The reduced design model has 10 states

    sigma = (d_x, d_y, d_z, u, v, w, phi, theta, p, q)

where d are body-frame position coordinates whose rate is taken to be the
body velocity (exact at the hover trim, where the body and world frames
coincide), and 3 inputs: wrench deviations from hover

    delta = (dGamma, tau_r, tau_p).

Yaw and yaw rate are excluded: the vehicle has no yaw actuation and the
remaining dynamics are yaw-symmetric.

``solve_care`` computes the stabilizing solution of

    A'P + PA - P B R^-1 B' P + Q = 0

from the stable invariant subspace of the Hamiltonian matrix, using a
symplectic diagonal balancing and an ordered real Schur form, followed by
Newton/Lyapunov refinement. The gain is stored positive,

    K = R^-1 B' P,   u = K (sigma_des - sigma).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from .errors import SynthesisError
from .dynamics import SimState, state_derivative
from .ioutil import atomic_write_text
from .kinematics import EulerAngles321
from .vehicle import VehicleParams, Wrench, hover_thrust

__all__ = [
    "SIGMA_LABELS",
    "INPUT_LABELS",
    "LinearModel",
    "LqrWeights",
    "LqrSolution",
    "linearize_hover",
    "reduced_dynamics",
    "finite_diff_jacobian",
    "default_weights",
    "solve_care",
    "lqr_gain",
    "write_gain_csv",
    "read_gain_csv",
]

SIGMA_LABELS = ("d_x", "d_y", "d_z", "u", "v", "w", "phi", "theta", "p", "q")
INPUT_LABELS = ("dGamma", "tau_r", "tau_p")

NSIGMA = 10
NINPUT = 3


@dataclass(frozen=True)
class LinearModel:
    """Linear model x_dot = A x + B u.

    The hover design model is the (10, 3) instance produced by
    :func:`linearize_hover`; the solver itself works for any dimensions.
    """

    A: np.ndarray
    B: np.ndarray

    def __post_init__(self) -> None:
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        B = np.asarray(self.B, dtype=float)
        if B.ndim == 1:
            B = B[:, None]
        n = A.shape[0]
        if A.shape != (n, n) or B.shape[0] != n or B.ndim != 2:
            raise ValueError(f"expected square A and conforming B, got {A.shape}, {B.shape}")
        if not (np.all(np.isfinite(A)) and np.all(np.isfinite(B))):
            raise ValueError("model matrices must be finite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "B", B)


@dataclass(frozen=True)
class LqrWeights:
    """Quadratic state/input weights; Q sym PSD, R sym PD (checked)."""

    Q: np.ndarray
    R: np.ndarray

    def __post_init__(self) -> None:
        Q = np.atleast_2d(np.asarray(self.Q, dtype=float))
        R = np.atleast_2d(np.asarray(self.R, dtype=float))
        if Q.shape[0] != Q.shape[1] or R.shape[0] != R.shape[1]:
            raise ValueError("Q and R must be square")
        for name, M in (("Q", Q), ("R", R)):
            scale = max(1.0, float(np.max(np.abs(M))))
            if np.max(np.abs(M - M.T)) > 1e-12 * scale:
                raise SynthesisError(f"{name} must be symmetric")
        q_eigs = np.linalg.eigvalsh(Q)
        if q_eigs.min() < -1e-12 * max(1.0, q_eigs.max()):
            raise SynthesisError("Q must be positive semidefinite")
        r_eigs = np.linalg.eigvalsh(R)
        if r_eigs.min() <= 1e-12 * max(1.0, abs(r_eigs.max())):
            raise SynthesisError("R must be positive definite")
        object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "R", R)

    @classmethod
    def from_diagonals(cls, q_diag, r_diag) -> "LqrWeights":
        q = np.asarray(q_diag, dtype=float)
        r = np.asarray(r_diag, dtype=float)
        if q.ndim != 1 or r.ndim != 1 or q.size == 0 or r.size == 0:
            raise ValueError("expected non-empty 1-d weight diagonals")
        return cls(np.diag(q), np.diag(r))


def default_weights() -> LqrWeights:
    """Stock hover weights: position/velocity soft, attitude and rates firm."""
    return LqrWeights.from_diagonals(
        [0.02, 0.02, 0.01, 0.1, 0.1, 0.1, 1.0, 1.0, 4.0, 4.0],
        [2.0, 1.0, 1.0],
    )


@dataclass(frozen=True)
class LqrSolution:
    """Riccati solution P, gain K = R^-1 B'P, and diagnostics.

    ``care_residual`` is the Frobenius norm of A'P + PA - PBR^-1B'P + Q
    divided by the sum of the norms of its four terms (the usual relative
    residual for algebraic Riccati equations).
    """

    K: np.ndarray
    P: np.ndarray
    closed_loop_eigs: np.ndarray
    care_residual: float


def linearize_hover(p: VehicleParams) -> LinearModel:
    """Analytic Jacobians of the reduced dynamics at the hover trim."""
    A = np.zeros((NSIGMA, NSIGMA))
    A[0, 3] = A[1, 4] = A[2, 5] = 1.0       # d_dot = body velocity
    A[3, 7] = p.g                           # u_dot = g*theta
    A[4, 6] = -p.g                          # v_dot = -g*phi
    A[6, 8] = 1.0                           # phi_dot = p
    A[7, 9] = 1.0                           # theta_dot = q
    B = np.zeros((NSIGMA, NINPUT))
    B[5, 0] = 1.0 / p.total_mass            # w_dot from thrust deviation
    B[8, 1] = 1.0 / p.J[0]                  # p_dot from roll torque
    B[9, 2] = 1.0 / p.J[1]                  # q_dot from pitch torque
    return LinearModel(A, B)


def reduced_dynamics(p: VehicleParams, sigma, delta) -> np.ndarray:
    """Nonlinear reduced dynamics sigma_dot(sigma, delta) about hover.

    Embeds sigma into the full state (yaw and yaw rate pinned to zero),
    applies the hover wrench plus the deviation, and projects back. The
    d-rate is the body velocity by convention.
    """
    sigma = np.asarray(sigma, dtype=float).reshape(NSIGMA)
    delta = np.asarray(delta, dtype=float).reshape(NINPUT)
    s = SimState(
        sigma[0:3],
        sigma[3:6],
        EulerAngles321(sigma[6], sigma[7], 0.0),
        np.array([sigma[8], sigma[9], 0.0]),
    )
    w = Wrench(hover_thrust(p) + delta[0], delta[1], delta[2])
    full = state_derivative(p, s, w)
    out = np.empty(NSIGMA)
    out[0:3] = sigma[3:6]       # d_dot = (u, v, w)
    out[3:6] = full[3:6]
    out[6:8] = full[6:8]
    out[8:10] = full[9:11]
    return out


def finite_diff_jacobian(p: VehicleParams, h: float = 1e-6) -> LinearModel:
    """Central-difference Jacobians of :func:`reduced_dynamics` at hover."""
    if not (1e-8 <= h <= 1e-4):
        raise ValueError("finite-difference step h must be in [1e-8, 1e-4]")
    A = np.zeros((NSIGMA, NSIGMA))
    B = np.zeros((NSIGMA, NINPUT))
    z_s = np.zeros(NSIGMA)
    z_d = np.zeros(NINPUT)
    for j in range(NSIGMA):
        e = np.zeros(NSIGMA)
        e[j] = h
        A[:, j] = (reduced_dynamics(p, e, z_d) - reduced_dynamics(p, -e, z_d)) / (2 * h)
    for j in range(NINPUT):
        e = np.zeros(NINPUT)
        e[j] = h
        B[:, j] = (reduced_dynamics(p, z_s, e) - reduced_dynamics(p, z_s, -e)) / (2 * h)
    return LinearModel(A, B)


# ---------------------------------------------------------------------------
# CARE solver
# ---------------------------------------------------------------------------

def _pbh_full_rank(M: np.ndarray, n: int) -> bool:
    """Rank test with column normalization (robust to wildly scaled columns)."""
    M = M.copy()
    norms = np.linalg.norm(M, axis=0)
    nz = norms > 0.0
    M[:, nz] /= norms[nz]
    return np.linalg.matrix_rank(M) >= n


def _check_stabilizable_detectable(A, B, Q):
    n = A.shape[0]
    eigs = np.linalg.eigvals(A)
    # symmetric square-root factor of Q for the detectability test
    q_eigs, q_vecs = np.linalg.eigh(Q)
    keep = q_eigs > 1e-12 * max(1.0, float(q_eigs.max(initial=0.0)))
    C = (np.sqrt(q_eigs[keep])[:, None] * q_vecs[:, keep].T)
    I = np.eye(n)
    for lam in eigs:
        if lam.real < -1e-12 * max(1.0, abs(lam)):
            continue
        if not _pbh_full_rank(np.hstack([A - lam * I, B]).astype(complex), n):
            raise SynthesisError(
                f"(A, B) is not stabilizable: PBH rank defect at eigenvalue {lam:.6g}"
            )
        if C.size and not _pbh_full_rank(
            np.vstack([A - lam * I, C.astype(complex)]).T.conj(), n
        ):
            raise SynthesisError(
                f"(A, Q^1/2) is not detectable: PBH rank defect at eigenvalue {lam:.6g}"
            )
        if not C.size:
            raise SynthesisError("(A, Q^1/2) is not detectable: Q has no range")


def _symplectic_balance(H: np.ndarray, n: int) -> np.ndarray:
    """Diagonal similarity d (length n) that balances the Hamiltonian.

    The full 2n scaling is diag(d, 1/d), which preserves Hamiltonian
    structure. Entries are integer powers of two (lossless in floating
    point).
    """
    M = np.abs(H)
    np.fill_diagonal(M, 0.0)
    _, (sca, _) = linalg.matrix_balance(M, permute=False, separate=True)
    logs = np.log2(sca)
    return 2.0 ** np.round((logs[:n] - logs[n:]) / 2.0)


def _care(A, B, Q, R):
    """Stabilizing CARE solution via the Hamiltonian stable subspace."""
    n = A.shape[0]
    try:
        R_fac = linalg.cho_factor(R)
    except linalg.LinAlgError as exc:
        raise SynthesisError(f"R is not positive definite: {exc}") from exc
    G = B @ linalg.cho_solve(R_fac, B.T)
    G = 0.5 * (G + G.T)

    H = np.block([[A, -G], [-Q, -A.T]])

    ham_eigs = np.linalg.eigvals(H)
    if np.min(np.abs(ham_eigs.real)) < 1e-9:
        raise SynthesisError(
            "Hamiltonian eigenvalue within 1e-9 of the imaginary axis; "
            "no well-separated stabilizing solution"
        )

    d = _symplectic_balance(H, n)
    Dv = np.concatenate([d, 1.0 / d])
    Hb = H * np.outer(1.0 / Dv, Dv)

    try:
        _, Z, sdim = linalg.schur(Hb, output="real", sort="lhp")
    except linalg.LinAlgError as exc:
        raise SynthesisError(f"Schur factorization failed: {exc}") from exc
    if sdim != n:
        raise SynthesisError(
            f"Hamiltonian split produced {sdim} stable eigenvalues (expected {n})"
        )
    U = Dv[:, None] * Z[:, :n]
    U1, U2 = U[:n], U[n:]
    try:
        P = np.linalg.solve(U1.T, U2.T).T
    except np.linalg.LinAlgError as exc:
        raise SynthesisError(f"singular subspace basis: {exc}") from exc
    P = 0.5 * (P + P.T)

    # Newton/Lyapunov refinement; also serves as the convergence certificate.
    # The relative residual normalizes by the sum of the term norms rather
    # than ||Q|| alone: when ||P|| >> ||Q|| the residual has a floating-point
    # floor near eps*||P G P|| that no solution method can beat, so a
    # Q-relative measure would reject solutions that are accurate to working
    # precision. ||P A|| = ||A^T P|| for symmetric P, hence the factor 2.
    def _residual(Pc):
        r = A.T @ Pc + Pc @ A - Pc @ G @ Pc + Q
        denom = (
            2.0 * float(np.linalg.norm(A.T @ Pc))
            + float(np.linalg.norm(Pc @ G @ Pc))
            + float(np.linalg.norm(Q))
        )
        return float(np.linalg.norm(r)) / max(denom, np.finfo(float).tiny), r

    rel, res = _residual(P)
    best_P, best_rel = P, rel
    for _ in range(20):
        if best_rel <= 1e-13:
            break
        Acl = A - G @ P
        try:
            X = linalg.solve_continuous_lyapunov(Acl.T.copy(), -res)
        except (linalg.LinAlgError, ValueError) as exc:
            raise SynthesisError(f"Lyapunov refinement failed: {exc}") from exc
        P = P + X
        P = 0.5 * (P + P.T)
        rel, res = _residual(P)
        if rel < best_rel:
            best_P, best_rel = P, rel
        else:
            break  # no further improvement: at the attainable floor
    P, rel = best_P, best_rel
    if rel > 1e-8:
        raise SynthesisError(
            f"CARE residual {rel:.3e} exceeds 1e-8 after refinement"
        )

    # cho_solve returns an F-contiguous array; force C order so that a gain
    # written to CSV and read back multiplies bit-identically (BLAS summation
    # order depends on memory layout).
    K = np.ascontiguousarray(linalg.cho_solve(R_fac, B.T @ P))
    cl_eigs = np.sort_complex(np.linalg.eigvals(A - B @ K))
    if np.any(cl_eigs.real >= 0.0):
        raise SynthesisError("closed loop is not Hurwitz")
    return P, K, cl_eigs, rel


def solve_care(model: LinearModel, weights: LqrWeights) -> LqrSolution:
    """Solve the CARE for the given model/weights and package the gain.

    Weights are jointly normalized by max(diag(R)) before solving (a
    mathematical no-op for K that conditions the Hamiltonian and makes
    joint Q/R rescaling an exact no-op numerically); P is scaled back.
    """
    A, B = model.A, model.B
    Q, R = weights.Q, weights.R
    if Q.shape != A.shape or R.shape != (B.shape[1], B.shape[1]):
        raise ValueError(
            f"weight shapes {Q.shape}/{R.shape} do not match model {A.shape}/{B.shape}"
        )
    _check_stabilizable_detectable(A, B, Q)
    s = float(np.max(np.diag(R)))
    if s <= 0.0:
        raise SynthesisError("R diagonal must be positive")
    P_n, K, cl_eigs, rel = _care(A, B, Q / s, R / s)
    return LqrSolution(K=K, P=s * P_n, closed_loop_eigs=cl_eigs, care_residual=rel)


def lqr_gain(p: VehicleParams, weights: LqrWeights | None = None) -> LqrSolution:
    """Hover gain for a vehicle: analytic linearization + CARE solve."""
    return solve_care(linearize_hover(p), weights or default_weights())


# ---------------------------------------------------------------------------
# gain file I/O (plain CSV, row-major, full-precision decimal)
# ---------------------------------------------------------------------------

def write_gain_csv(path: str, K: np.ndarray) -> None:
    K = np.atleast_2d(np.asarray(K, dtype=float))
    text = "".join(",".join(repr(float(v)) for v in row) + "\n" for row in K)
    atomic_write_text(path, text)


def read_gain_csv(path: str) -> np.ndarray:
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                rows.append([float(tok) for tok in line.split(",")])
            except ValueError as exc:
                raise ValueError(f"{path}:{ln}: bad gain entry ({exc})") from exc
    if not rows or any(len(r) != len(rows[0]) for r in rows):
        raise ValueError(f"{path}: ragged or empty gain matrix")
    K = np.array(rows)
    if not np.all(np.isfinite(K)):
        raise ValueError(f"{path}: non-finite gain entry")
    return K

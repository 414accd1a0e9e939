"""Matrix parameterization (lambda, a, b, P, Q) of invariant nearly
half-flat SU(3)-structures on S3 x S3 and the derived tensors.

A structure is described by a nonzero constant lambda, two reals a, b and
two real 3x3 matrices P, Q.  The 2-form is omega = sum P_ij e^{2i-1}^e^{2j};
the 3-form gamma carries (a, b) on e135, e246 and the matrices

    Q1 = Q - (lambda/2) Adj(P^T),    Q2 = -Q - (lambda/2) Adj(P^T)

on the de^{2i-1}^e^{2j} and e^{2i-1}^de^{2j} slots.  Validity requires
Q^T P symmetric and the normalization (det P)^2 = bracket(a, b, Q1, Q2),
which make the induced J an almost complex structure; additionally
omega ^ J gamma = 0 must hold (it is not implied by the first two
conditions: it removes the (2,0) + (0,2) part of omega, making the metric
symmetric), plus positive definiteness of the metric.  The validator
checks all of these.

Conventions fixed here and relied on throughout the package:

* J is stored as the endomorphism of the tangent space, columns are the
  images of the dual frame vectors e_1..e_6.  The closed-form block
  expression acts on the coframe and is the transpose of this matrix.
* g(X, Y) = omega(X, JY), i.e. g = W J with W the component matrix of
  omega; positive definite exactly on valid structures.
* Both signs of det P are admitted; the sign is the orientation flag.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from nhflat.exterior import (
    DIM,
    BASIS,
    BASIS_INDEX,
    COFRAME_DIFFERENTIAL,
    Form,
    contract,
    d,
    form_inner,
    hodge,
    pullback,
    volume_coefficient,
    wedge,
    wedge_all,
)
from nhflat.mat3 import adjugate, det3

DEFAULT_TOL = 1e-9
SINGULAR_DETP = 1e-12


class StructureError(ValueError):
    """Base error for structure construction and validation."""


class SingularStructureError(StructureError):
    """det P is (numerically) zero; the parameterization degenerates."""


class InvalidStructureError(StructureError):
    """The parameters violate the validity constraints beyond tolerance."""


def _e(i: int) -> Form:
    return Form.monomial((i,))


def _de(i: int) -> Form:
    pair, sign = COFRAME_DIFFERENTIAL[i]
    return Form.monomial(pair, sign)


# cached monomial forms of the four building blocks of invariant 3-forms
_E135 = Form.monomial((1, 3, 5))
_E246 = Form.monomial((2, 4, 6))
_DE_E = [[wedge(_de(2 * i + 1), _e(2 * j + 2)) for j in range(3)] for i in range(3)]
_E_DE = [[wedge(_e(2 * i + 1), _de(2 * j + 2)) for j in range(3)] for i in range(3)]
_DE_DE = [[wedge(_de(2 * i + 1), _de(2 * j + 2)) for j in range(3)] for i in range(3)]


def invariant_three_form(c135: float, c246: float, M1, M2) -> Form:
    """c135 e135 + c246 e246 + sum M1_ij de^{2i-1}^e^{2j} + M2_ij e^{2i-1}^de^{2j}."""
    out = c135 * _E135 + c246 * _E246
    M1 = np.asarray(M1, dtype=float)
    M2 = np.asarray(M2, dtype=float)
    for i in range(3):
        for j in range(3):
            if M1[i, j]:
                out = out + M1[i, j] * _DE_E[i][j]
            if M2[i, j]:
                out = out + M2[i, j] * _E_DE[i][j]
    return out


def build_omega(P) -> Form:
    """omega = sum P_ij e^{2i-1} ^ e^{2j}."""
    P = np.asarray(P, dtype=float)
    f = Form(2)
    for i in range(3):
        for j in range(3):
            a, b = 2 * i + 1, 2 * j + 2
            if a < b:
                f.coeffs[BASIS_INDEX[2][(a, b)]] += P[i, j]
            else:
                f.coeffs[BASIS_INDEX[2][(b, a)]] -= P[i, j]
    return f


def omega_squared(P) -> Form:
    """Closed form of omega^2: -2 sum Adj(P^T)_ij de^{2i-1} ^ de^{2j}."""
    adjPT = adjugate(np.asarray(P, dtype=float).T)
    out = Form(4)
    for i in range(3):
        for j in range(3):
            if adjPT[i, j]:
                out = out + (-2.0 * adjPT[i, j]) * _DE_DE[i][j]
    return out


def build_delta(P) -> Form:
    """The symmetric potential with d(delta) = omega^2 and delta ^ omega = 0."""
    adjPT = adjugate(np.asarray(P, dtype=float).T)
    return invariant_three_form(0.0, 0.0, -adjPT, -adjPT)


def q1_q2(lam: float, P, Q):
    adjPT = adjugate(np.asarray(P, dtype=float).T)
    Q = np.asarray(Q, dtype=float)
    return Q - 0.5 * lam * adjPT, -Q - 0.5 * lam * adjPT


def build_gamma(lam: float, a: float, b: float, P, Q) -> Form:
    """gamma = a e135 + b e246 + sum (Q1)_ij de^{2i-1}^e^{2j} + (Q2)_ij e^{2i-1}^de^{2j}.

    Satisfies d(gamma) = (lam/2) omega^2 identically, for any parameters."""
    Q1, Q2 = q1_q2(lam, P, Q)
    return invariant_three_form(a, b, Q1, Q2)


def compute_abr(a: float, b: float, Q1, Q2):
    """The scalars A, B and matrices R1, R2, R entering J gamma and the flow."""
    Q1 = np.asarray(Q1, dtype=float)
    Q2 = np.asarray(Q2, dtype=float)
    tr12 = float(np.trace(Q1.T @ Q2))
    A = a * tr12 - 2.0 * det3(Q1) - a * a * b
    B = -(b * tr12 - 2.0 * det3(Q2) - a * b * b)
    R1 = -((a * b + tr12) * Q1 - 2.0 * a * adjugate(Q2.T) - 2.0 * Q1 @ Q2.T @ Q1)
    R2 = (a * b + tr12) * Q2 - 2.0 * b * adjugate(Q1.T) - 2.0 * Q2 @ Q1.T @ Q2
    return A, B, R1, R2, R1 + R2


def normalization_bracket(a: float, b: float, Q1, Q2) -> float:
    """Right-hand side of the normalization condition for (det P)^2."""
    Q1 = np.asarray(Q1, dtype=float)
    Q2 = np.asarray(Q2, dtype=float)
    tr12 = float(np.trace(Q1.T @ Q2))
    return (
        -((a * b - tr12) ** 2)
        - 4.0 * (a * det3(Q2) + b * det3(Q1))
        + 4.0 * float(np.trace(adjugate(Q1.T @ Q2)))
    )


def normalization_residual(a: float, b: float, Q1, Q2, det_p: float) -> float:
    """(det P)^2 minus the bracket; zero exactly when J^2 = -id."""
    return det_p * det_p - normalization_bracket(a, b, Q1, Q2)


def _j_blocks(a: float, b: float, Q1, Q2):
    tr12 = float(np.trace(Q1.T @ Q2))
    oo = (a * b - tr12) * np.eye(3) + 2.0 * Q2 @ Q1.T
    oe = -2.0 * (a * Q2 - adjugate(Q1.T))
    eo = 2.0 * (b * Q1.T - adjugate(Q2))
    ee = -(a * b - tr12) * np.eye(3) - 2.0 * Q1.T @ Q2
    C = np.empty((6, 6))
    for r in range(3):
        for i in range(3):
            C[2 * r, 2 * i] = oo[r, i]
            C[2 * r, 2 * i + 1] = oe[r, i]
            C[2 * r + 1, 2 * i] = eo[r, i]
            C[2 * r + 1, 2 * i + 1] = ee[r, i]
    return C


def build_j(a: float, b: float, Q1, Q2, det_p: float, tol: float = 1e-7) -> np.ndarray:
    """Closed-form almost complex structure as a tangent endomorphism.

    Requires the normalization to hold; raises if det P is singular or the
    result fails J^2 = -id beyond tol."""
    if abs(det_p) < SINGULAR_DETP:
        raise SingularStructureError(f"det P = {det_p} is singular")
    Q1 = np.asarray(Q1, dtype=float)
    Q2 = np.asarray(Q2, dtype=float)
    J = _j_blocks(a, b, Q1, Q2).T / det_p
    err = np.max(np.abs(J @ J + np.eye(6)))
    if err > tol:
        raise InvalidStructureError(f"J^2 + id = {err:.3e} exceeds tolerance {tol}")
    return J


def omega_component_matrix(omega: Form) -> np.ndarray:
    """Skew component matrix W with W[k,l] = omega(e_k, e_l)."""
    W = np.zeros((6, 6))
    for n, (i, j) in enumerate(BASIS[2]):
        W[i - 1, j - 1] = omega.coeffs[n]
        W[j - 1, i - 1] = -omega.coeffs[n]
    return W


def hitchin_j(gamma: Form, omega: Form) -> np.ndarray:
    """Almost complex structure from the stable-form construction
    K(X) = (X -| gamma) ^ gamma, independent oracle for build_j.

    Normalized by tr(K^2) and sign-fixed so that omega(., J.) is positive
    definite."""
    if gamma.degree != 3 or omega.degree != 2:
        raise ValueError("hitchin_j expects a 3-form and a 2-form")
    om3 = volume_coefficient(wedge_all(omega, omega, omega))
    if abs(om3) < 1e-300:
        raise SingularStructureError("omega^3 = 0")
    K = np.zeros((6, 6))
    for a in range(1, DIM + 1):
        f5 = wedge(contract(a, gamma), gamma)
        for n, mono in enumerate(BASIS[5]):
            missing = 21 - sum(mono)  # the one index absent from a 5-monomial
            K[missing - 1, a - 1] += ((-1) ** (missing - 1)) * f5.coeffs[n]
    tr2 = float(np.trace(K @ K))
    if tr2 >= 0:
        raise InvalidStructureError("gamma is not stable (tr K^2 >= 0)")
    J = K / np.sqrt(-tr2 / 6.0)
    g = omega_component_matrix(omega) @ J
    if np.linalg.eigvalsh(0.5 * (g + g.T)).min() < 0:
        J = -J
    return J


def build_j_gamma(A: float, B: float, R1, R2, det_p: float) -> Form:
    """J gamma = (2/det P)(A e135 + B e246 + R1, R2 on the mixed slots)."""
    if abs(det_p) < SINGULAR_DETP:
        raise SingularStructureError(f"det P = {det_p} is singular")
    s = 2.0 / det_p
    return invariant_three_form(s * A, s * B, s * np.asarray(R1), s * np.asarray(R2))


def metric_from(omega: Form, J: np.ndarray) -> np.ndarray:
    """g(X, Y) = omega(X, JY) as a 6x6 matrix."""
    return omega_component_matrix(omega) @ J


@dataclass
class ValidationReport:
    residuals: dict
    metric_spd: bool
    tol: float

    @property
    def passed(self) -> bool:
        return self.metric_spd and all(v <= self.tol for v in self.residuals.values())

    @property
    def worst(self):
        name = max(self.residuals, key=lambda k: self.residuals[k])
        return name, self.residuals[name]

    def failing(self):
        bad = [k for k, v in self.residuals.items() if v > self.tol]
        if not self.metric_spd:
            bad.append("metric_spd")
        return bad


class NhfStructure:
    """An invariant nearly half-flat structure with its derived cache.

    All derived data is computed eagerly on construction and never mutated;
    instances are safe to share between threads.  Construction only rejects
    singular det P; use :meth:`validate` to test the remaining constraints
    (so that invalid records can still be diagnosed)."""

    def __init__(self, lam: float, a: float, b: float, P, Q):
        if lam == 0:
            raise StructureError("lambda must be nonzero")
        self.lam = float(lam)
        self.a = float(a)
        self.b = float(b)
        self.P = np.asarray(P, dtype=float).copy()
        self.Q = np.asarray(Q, dtype=float).copy()
        if self.P.shape != (3, 3) or self.Q.shape != (3, 3):
            raise StructureError("P and Q must be 3x3 matrices")
        self.det_p = det3(self.P)
        if abs(self.det_p) < SINGULAR_DETP:
            raise SingularStructureError(f"det P = {self.det_p} is singular")
        self.orientation = 1 if self.det_p > 0 else -1
        self.Q1, self.Q2 = q1_q2(self.lam, self.P, self.Q)
        self.omega = build_omega(self.P)
        self.delta = build_delta(self.P)
        self.gamma = invariant_three_form(self.a, self.b, self.Q1, self.Q2)
        self.A, self.B, self.R1, self.R2, self.R = compute_abr(
            self.a, self.b, self.Q1, self.Q2
        )
        self.Jgamma = build_j_gamma(self.A, self.B, self.R1, self.R2, self.det_p)
        # lenient J: residual recorded, raised only through validate/build_j
        self.J = _j_blocks(self.a, self.b, self.Q1, self.Q2).T / self.det_p
        self.j_squared_residual = float(np.max(np.abs(self.J @ self.J + np.eye(6))))
        self.g = metric_from(self.omega, self.J)

    # -- derived helpers -------------------------------------------------

    @property
    def w1_minus(self) -> float:
        return 0.75 * self.lam

    def omega_cubed(self) -> Form:
        return wedge(self.omega, wedge(self.omega, self.omega))

    def metric(self) -> np.ndarray:
        """The induced metric; raises if it is not positive definite."""
        sym = 0.5 * (self.g + self.g.T)
        if np.linalg.eigvalsh(sym).min() <= 0:
            raise InvalidStructureError("induced metric is not positive definite")
        return self.g.copy()

    def metric_is_spd(self) -> bool:
        sym = 0.5 * (self.g + self.g.T)
        return bool(np.linalg.eigvalsh(sym).min() > 0)

    def validate(self, tol: float = DEFAULT_TOL) -> ValidationReport:
        """Residuals of every constraint of the matrix description."""
        om, gam, Jg = self.omega, self.gamma, self.Jgamma
        om2 = wedge(om, om)
        om3 = wedge(om2, om)
        res = {
            "qtp_symmetry": float(np.max(np.abs(self.Q.T @ self.P - self.P.T @ self.Q))),
            "normalization": abs(
                normalization_residual(self.a, self.b, self.Q1, self.Q2, self.det_p)
            ),
            "j_squared": self.j_squared_residual,
            "gamma_wedge_omega": wedge(gam, om).max_abs(),
            "jgamma_wedge_omega": wedge(Jg, om).max_abs(),
            "gamma_wedge_jgamma": (wedge(gam, Jg) - (2.0 / 3.0) * om3).max_abs(),
            "dgamma": (d(gam) - 0.5 * self.lam * om2).max_abs(),
            "ddelta": (d(self.delta) - om2).max_abs(),
            "metric_symmetry": float(np.max(np.abs(self.g - self.g.T))),
        }
        return ValidationReport(residuals=res, metric_spd=self.metric_is_spd(), tol=tol)

    # -- serialization ---------------------------------------------------

    def to_record(self) -> dict:
        return {
            "lambda": self.lam,
            "a": self.a,
            "b": self.b,
            "P": self.P.tolist(),
            "Q": self.Q.tolist(),
            "orientation": self.orientation,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "NhfStructure":
        try:
            lam = float(rec["lambda"])
            a = float(rec["a"])
            b = float(rec["b"])
            P = np.asarray(rec["P"], dtype=float)
            Q = np.asarray(rec["Q"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise StructureError(f"malformed structure record: {exc}") from exc
        s = cls(lam, a, b, P, Q)
        want = rec.get("orientation")
        if want is not None and int(want) != s.orientation:
            raise StructureError(
                f"record orientation {want} contradicts sign(det P) = {s.orientation}"
            )
        return s

    def rotated(self, gmat, hmat) -> "NhfStructure":
        """Transport by (g, h) in SO(3) x SO(3): P -> g P h^T, Q -> g Q h^T."""
        gmat = np.asarray(gmat, dtype=float)
        hmat = np.asarray(hmat, dtype=float)
        return NhfStructure(
            self.lam, self.a, self.b, gmat @ self.P @ hmat.T, gmat @ self.Q @ hmat.T
        )

    def __repr__(self):
        return (
            f"NhfStructure(lambda={self.lam:g}, a={self.a:g}, b={self.b:g}, "
            f"detP={self.det_p:g}, orientation={self.orientation:+d})"
        )


def random_rotation(rng) -> np.ndarray:
    """Haar-ish random SO(3) element via QR with positive determinant."""
    q, r = np.linalg.qr(rng.normal(size=(3, 3)))
    q = q @ np.diag(np.sign(np.diag(r)))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


class SamplerExhaustedError(StructureError):
    """root-solve sampling failed to find a valid structure."""


def _sample_family_member(rng) -> NhfStructure:
    from nhflat import families

    pick = rng.integers(0, 5)
    if pick == 0:
        lam = rng.uniform(0.5, 5.0) * rng.choice([-1.0, 1.0])
        return families.nearly_kahler(lam)
    if pick == 1:
        lam = rng.uniform(0.5, 3.0)
        pmax = 4.0 * np.sqrt(3.0) / (9.0 * lam * lam)
        p = rng.uniform(0.15, 0.95) * pmax
        return families.w1_family(lam, p, sign_q=rng.choice([-1, 1]))
    if pick == 2:
        a = 1.0 / 256.0 + rng.uniform(0.002, 0.05)
        return families.w1w3_family(a, sign_p=rng.choice([-1, 1]))
    if pick == 3:
        p = rng.uniform(0.1, 0.6) * rng.choice([-1.0, 1.0])
        sign = int(rng.choice([-1, 1]))
        if 36.0 * p * p + sign * 3.0 * np.sqrt(3.0) * p < 0:
            sign = -sign
        return families.zero_scalar_structure(p, sign, sign_q=int(rng.choice([-1, 1])))
    t = rng.uniform(-0.35, 0.35)
    return families.sine_cone_trajectory(t)


def sample_random_structure(seed, method: str = "rotate-family", max_retries: int = 50):
    """Random valid structure for property tests.

    "rotate-family" transports a random closed-form family member by a
    random SO(3) x SO(3) rotation (always valid, by equivariance).
    "root-solve" draws random (a, b, Q, symmetric S), sets P = Q^{-T} S c
    and solves the normalization for the scale c by bracketing."""
    rng = np.random.default_rng(seed)
    if method == "rotate-family":
        base = _sample_family_member(rng)
        return base.rotated(random_rotation(rng), random_rotation(rng))
    if method != "root-solve":
        raise ValueError(f"unknown sampling method: {method}")

    from scipy.optimize import least_squares

    def constraint_vector(x, lam, a, b, Q):
        # The defining equations of a valid structure as a function of P:
        # Q^T P symmetric (3), the normalization (1), and omega ^ J gamma = 0
        # (6).  The last block is not implied by the first two: it removes
        # the (2,0) + (0,2) part of omega with respect to J, which is what
        # makes the metric symmetric.
        P = x.reshape(3, 3)
        dp = det3(P)
        if abs(dp) < 1e-8:
            return np.full(10, 1e3)
        Q1, Q2 = q1_q2(lam, P, Q)
        sym = (Q.T @ P - P.T @ Q)[np.triu_indices(3, 1)]
        norm = [normalization_residual(a, b, Q1, Q2, dp)]
        A, B, R1, R2, _ = compute_abr(a, b, Q1, Q2)
        jg_om = wedge(build_j_gamma(A, B, R1, R2, dp), build_omega(P)).coeffs
        return np.concatenate([sym, norm, jg_om])

    for _ in range(max_retries):
        # Perturb a rotated family member off the closed-form locus, then
        # solve the constraints for P by least squares.
        base = _sample_family_member(rng).rotated(
            random_rotation(rng), random_rotation(rng)
        )
        eps = 0.1
        a = base.a * (1.0 + eps * rng.standard_normal())
        b = base.b * (1.0 + eps * rng.standard_normal())
        Q = base.Q * (1.0 + eps * rng.standard_normal((3, 3)))
        x0 = (base.P * (1.0 + eps * rng.standard_normal((3, 3)))).ravel()
        sol = least_squares(
            constraint_vector,
            x0,
            args=(base.lam, a, b, Q),
            xtol=1e-15,
            ftol=1e-15,
            gtol=1e-15,
        )
        if np.max(np.abs(sol.fun)) > 1e-11:
            continue
        try:
            s = NhfStructure(base.lam, a, b, sol.x.reshape(3, 3), Q)
        except StructureError:
            continue
        if s.validate().passed and s.metric_is_spd():
            return s
    raise SamplerExhaustedError(f"no valid structure after {max_retries} attempts")

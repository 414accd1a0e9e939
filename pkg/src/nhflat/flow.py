"""RK4 integration of the nearly half-flat evolution equations.

The flow evolves (a, b, Q1, Q2); P is not evolved but recovered from the
constraint Q1 + Q2 = -lambda Adj(P^T) at every stage.  A trajectory of
structures sweeps out a nearly parallel G2-structure

    phi = dt ^ omega + gamma,    psi = omega^2 / 2 - dt ^ J gamma

on (t0, t1) x S^3 x S^3 exactly when d phi = lambda psi and d psi = 0,
which is what g2_residual measures.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from nhflat.exterior import d, wedge
from nhflat.mat3 import adjugate, det3
from nhflat.structure import (
    NhfStructure,
    SingularStructureError,
    build_j_gamma,
    build_omega,
    compute_abr,
    invariant_three_form,
    normalization_residual,
)

SINGULAR_DETP = 1e-6

CSV_COLUMNS = (
    ["t", "a", "b"]
    + [f"Q1_{i}{j}" for i in (1, 2, 3) for j in (1, 2, 3)]
    + [f"Q2_{i}{j}" for i in (1, 2, 3) for j in (1, 2, 3)]
    + [f"P_{i}{j}" for i in (1, 2, 3) for j in (1, 2, 3)]
    + ["norm_resid", "sym_resid", "g2_resid"]
)


class FlowSingularityError(SingularStructureError):
    """det P collapsed below the singularity threshold during the flow."""

    def __init__(self, message, t=None, trajectory=None):
        super().__init__(message)
        self.t = t
        self.trajectory = trajectory


def recover_p(lam: float, Q1: np.ndarray, Q2: np.ndarray, det_p_prev: float):
    """Invert Adj(P^T) = -(Q1 + Q2)/lambda for P.

    (det P)^2 = det Adj(P^T); the sign of det P is chosen to continue the
    previous value, which keeps P continuous along a flow line."""
    M = -(Q1 + Q2) / lam
    det_m = det3(M)
    if det_m <= 0:
        raise SingularStructureError(
            f"Adj(P^T) has nonpositive determinant {det_m:.3e}; P is not recoverable"
        )
    det_p = np.sqrt(det_m) * (1.0 if det_p_prev >= 0 else -1.0)
    P = (adjugate(M) / det_p).T
    return P, det_p


def flow_rhs(lam: float, a, b, Q1, Q2, det_p_sign: float = 1.0):
    """Time derivatives (a', b', Q1', Q2') of the evolution equations.

    Equivalent to gamma' = d omega - lambda J gamma, expressed on the
    matrix data:
        a'  = -(2 lambda / det P) A
        b'  = -(2 lambda / det P) B
        Q1' = -(2 lambda / det P) R1 + P
        Q2' = -(2 lambda / det P) R2 - P
    """
    P, det_p = recover_p(lam, Q1, Q2, det_p_sign)
    if abs(det_p) < SINGULAR_DETP:
        raise SingularStructureError(f"det P = {det_p:.3e} below threshold")
    A, B, R1, R2, _ = compute_abr(a, b, Q1, Q2)
    c = -2.0 * lam / det_p
    return c * A, c * B, c * R1 + P, c * R2 - P


@dataclass
class FlowSample:
    """One stored point of an integrated trajectory."""

    t: float
    structure: NhfStructure
    norm_resid: float
    sym_resid: float
    g2_resid: float

    def row(self):
        s = self.structure
        return (
            [self.t, s.a, s.b]
            + list(s.Q1.ravel())
            + list(s.Q2.ravel())
            + list(s.P.ravel())
            + [self.norm_resid, self.sym_resid, self.g2_resid]
        )


@dataclass
class Trajectory:
    lam: float
    samples: list = field(default_factory=list)
    terminated: str = "completed"

    @property
    def times(self):
        return np.array([s.t for s in self.samples])

    def structure_at(self, t: float) -> NhfStructure:
        """Stored structure at the sample time closest to t."""
        k = int(np.argmin(np.abs(self.times - t)))
        return self.samples[k].structure

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for s in self.samples:
            writer.writerow([f"{v:.12g}" for v in s.row()])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def to_record(self) -> dict:
        return {
            "lambda": self.lam,
            "terminated": self.terminated,
            "t_start": float(self.times[0]),
            "t_end": float(self.times[-1]),
            "steps": len(self.samples) - 1,
            "max_norm_resid": max(s.norm_resid for s in self.samples),
            "max_sym_resid": max(s.sym_resid for s in self.samples),
            "max_g2_resid": max(s.g2_resid for s in self.samples),
        }


def _derivative_forms(structure: NhfStructure, da, db, dQ1, dQ2):
    """(omega', gamma', (omega^2)', (J gamma)') for given state derivatives.

    P' is obtained by differentiating through M = Adj(P^T) = -(Q1+Q2)/lam:
        (det P)' = tr(Adj(M) M') / (2 det P)
        (P^T)'   = (Adj'(M) det P - Adj(M) (det P)') / (det P)^2
    where Adj'(M) in direction M' is the polarized adjugate."""
    from nhflat.mat3 import polarized_adjugate

    lam = structure.lam
    M = -(structure.Q1 + structure.Q2) / lam
    dM = -(dQ1 + dQ2) / lam
    det_p = structure.det_p
    ddet_p = float(np.trace(adjugate(M) @ dM)) / (2.0 * det_p)
    dPT = (polarized_adjugate(M, dM) * det_p - adjugate(M) * ddet_p) / det_p**2
    dP = dPT.T

    domega = build_omega(dP)
    dgamma = invariant_three_form(da, db, dQ1, dQ2)
    # (omega^2)' = 2 omega ^ omega'
    domega2 = 2.0 * wedge(structure.omega, domega)
    # (J gamma)' by differentiating (2/det P)(A e135 + B e246 + R1, R2)
    dA, dB, dR1, dR2 = _abr_derivative(
        structure.a, structure.b, structure.Q1, structure.Q2, da, db, dQ1, dQ2
    )
    djgamma = build_j_gamma(dA, dB, dR1, dR2, det_p) - (
        ddet_p / det_p
    ) * structure.Jgamma
    return domega, dgamma, domega2, djgamma


def _abr_derivative(a, b, Q1, Q2, da, db, dQ1, dQ2, eps=1e-6):
    """Directional derivative of (A, B, R1, R2) by central differences.

    The closed-form derivative is a long polynomial; central differences
    at machine-friendly step already give ~1e-10 accuracy, which is far
    below the discretization error this feeds into."""
    ap, bp = a + eps * da, b + eps * db
    am, bm = a - eps * da, b - eps * db
    hi = compute_abr(ap, bp, Q1 + eps * dQ1, Q2 + eps * dQ2)
    lo = compute_abr(am, bm, Q1 - eps * dQ1, Q2 - eps * dQ2)
    return tuple((h - l) / (2.0 * eps) for h, l in zip(hi[:4], lo[:4]))


def g2_residual(structure: NhfStructure, da, db, dQ1, dQ2) -> float:
    """Max-norm violation of d phi = lambda psi and d psi = 0 at one time.

    With phi = dt ^ omega + gamma and psi = omega^2/2 - dt ^ J gamma the
    two equations split into t-slice components:
        d phi - lambda psi = (d6 gamma - (lambda/2) omega^2)
                             + dt ^ (gamma' - d6 omega + lambda J gamma)
        d psi              = (1/2) d6 omega^2
                             + dt ^ ((1/2)(omega^2)' + d6 J gamma)
    All four pieces must vanish."""
    lam = structure.lam
    domega, dgamma, domega2, djgamma = _derivative_forms(
        structure, da, db, dQ1, dQ2
    )
    om2 = wedge(structure.omega, structure.omega)
    pieces = [
        (d(structure.gamma) - 0.5 * lam * om2).max_abs(),
        (dgamma - d(structure.omega) + lam * structure.Jgamma).max_abs(),
        0.5 * d(om2).max_abs(),
        (0.5 * domega2 + d(structure.Jgamma)).max_abs(),
    ]
    return max(pieces)


def integrate(
    initial: NhfStructure,
    t0: float,
    t1: float,
    h: float = 1e-3,
    record_every: int = 1,
    validate_initial: bool = True,
) -> Trajectory:
    """RK4 integration of the flow from a valid structure.

    Integrates forward (t1 > t0) or backward (t1 < t0) with fixed step h,
    recording every record_every-th step.  Raises FlowSingularityError
    (carrying the partial trajectory) if |det P| drops below 1e-6."""
    if validate_initial:
        report = initial.validate()
        if not report.passed:
            from nhflat.structure import InvalidStructureError

            raise InvalidStructureError(
                f"initial structure invalid: worst residual {report.worst[1]:.3e}"
                f" ({report.worst[0]})"
            )
    lam = initial.lam
    direction = 1.0 if t1 >= t0 else -1.0
    h = abs(h) * direction
    n_steps = int(round(abs(t1 - t0) / abs(h)))

    a, b = initial.a, initial.b
    Q1, Q2 = initial.Q1.copy(), initial.Q2.copy()
    det_p_sign = initial.det_p
    traj = Trajectory(lam=lam)

    def sample(t, a, b, Q1, Q2):
        P, det_p = recover_p(lam, Q1, Q2, det_p_sign)
        Q = 0.5 * (Q1 - Q2)
        s = NhfStructure(lam, a, b, P, Q)
        da, db, dQ1, dQ2 = flow_rhs(lam, a, b, Q1, Q2, det_p)
        return FlowSample(
            t=t,
            structure=s,
            norm_resid=normalization_residual(a, b, Q1, Q2, det_p),
            sym_resid=float(np.max(np.abs(Q.T @ P - P.T @ Q))),
            g2_resid=g2_residual(s, da, db, dQ1, dQ2),
        )

    t = t0
    try:
        traj.samples.append(sample(t0, a, b, Q1, Q2))
        for k in range(n_steps):
            t = t0 + k * h

            def rhs(a_, b_, Q1_, Q2_):
                return flow_rhs(lam, a_, b_, Q1_, Q2_, det_p_sign)

            k1 = rhs(a, b, Q1, Q2)
            k2 = rhs(
                a + 0.5 * h * k1[0],
                b + 0.5 * h * k1[1],
                Q1 + 0.5 * h * k1[2],
                Q2 + 0.5 * h * k1[3],
            )
            k3 = rhs(
                a + 0.5 * h * k2[0],
                b + 0.5 * h * k2[1],
                Q1 + 0.5 * h * k2[2],
                Q2 + 0.5 * h * k2[3],
            )
            k4 = rhs(a + h * k3[0], b + h * k3[1], Q1 + h * k3[2], Q2 + h * k3[3])
            a += (h / 6.0) * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
            b += (h / 6.0) * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
            Q1 = Q1 + (h / 6.0) * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
            Q2 = Q2 + (h / 6.0) * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3])
            _, det_p_sign = recover_p(lam, Q1, Q2, det_p_sign)
            if (k + 1) % record_every == 0 or k == n_steps - 1:
                traj.samples.append(sample(t0 + (k + 1) * h, a, b, Q1, Q2))
    except SingularStructureError as exc:
        traj.terminated = "singular"
        raise FlowSingularityError(
            f"flow reached a singular point near t = {t:.6f}: {exc}",
            t=t,
            trajectory=traj,
        ) from exc
    return traj

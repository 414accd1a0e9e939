"""Exterior algebra over the left-invariant coframe e1..e6 of S3 x S3.

Forms are dense coefficient vectors over the lexicographically ordered
ascending-index monomial basis of each degree (dims 1, 6, 15, 20, 15, 6, 1).
The differential is the Leibniz extension of the su(2)+su(2) structure
constants

    de1 = e35,  de3 = -e15,  de5 = e13,
    de2 = e46,  de4 = -e26,  de6 = e24.

The positive orientation is e123456; all Hodge signs follow from it.
"""

from __future__ import annotations

import itertools

import numpy as np

DIM = 6

#: degree -> list of ascending index tuples (1-based indices)
BASIS = {k: list(itertools.combinations(range(1, DIM + 1), k)) for k in range(DIM + 1)}
#: degree -> {tuple: position}
BASIS_INDEX = {k: {mono: n for n, mono in enumerate(BASIS[k])} for k in range(DIM + 1)}
DIMS = [len(BASIS[k]) for k in range(DIM + 1)]

# differential of each coframe element: index -> (2-index tuple, sign)
COFRAME_DIFFERENTIAL = {
    1: ((3, 5), 1),
    2: ((4, 6), 1),
    3: ((1, 5), -1),
    4: ((2, 6), -1),
    5: ((1, 3), 1),
    6: ((2, 4), 1),
}


def _merge(left: tuple, right: tuple):
    """Merge two ascending index tuples into an ascending tuple with the
    sign of the shuffle, or None if an index repeats."""
    if set(left) & set(right):
        return None, 0
    merged = left + right
    order = sorted(range(len(merged)), key=lambda n: merged[n])
    sign = 1
    # parity by counting inversions (tuples have length <= 6)
    for i in range(len(order)):
        for j in range(i + 1, len(order)):
            if order[i] > order[j]:
                sign = -sign
    return tuple(merged[n] for n in order), sign


# cache of merge tables keyed by (deg_left, deg_right)
_WEDGE_TABLE: dict = {}


def _wedge_table(j: int, k: int):
    tbl = _WEDGE_TABLE.get((j, k))
    if tbl is None:
        tbl = []
        for left in BASIS[j]:
            row = []
            for right in BASIS[k]:
                mono, sign = _merge(left, right)
                row.append(None if sign == 0 else (BASIS_INDEX[j + k][mono], sign))
            tbl.append(row)
        _WEDGE_TABLE[(j, k)] = tbl
    return tbl


class Form:
    """Dense invariant differential form of a fixed degree."""

    __slots__ = ("degree", "coeffs")

    def __init__(self, degree: int, coeffs=None):
        if not 0 <= degree <= DIM:
            raise ValueError(f"degree must be in 0..{DIM}, got {degree}")
        self.degree = degree
        if coeffs is None:
            self.coeffs = np.zeros(DIMS[degree])
        else:
            coeffs = np.asarray(coeffs, dtype=float)
            if coeffs.shape != (DIMS[degree],):
                raise ValueError(
                    f"degree {degree} expects {DIMS[degree]} coefficients, got {coeffs.shape}"
                )
            self.coeffs = coeffs.copy()

    @classmethod
    def monomial(cls, indices, coeff: float = 1.0) -> "Form":
        """Form c * e^{i1} ^ ... ^ e^{ik} for ascending indices."""
        indices = tuple(indices)
        if indices not in BASIS_INDEX[len(indices)]:
            raise ValueError(f"not an ascending index tuple: {indices}")
        f = cls(len(indices))
        f.coeffs[BASIS_INDEX[len(indices)][indices]] = coeff
        return f

    @classmethod
    def zero(cls, degree: int) -> "Form":
        return cls(degree)

    def copy(self) -> "Form":
        return Form(self.degree, self.coeffs)

    def __add__(self, other: "Form") -> "Form":
        if self.degree != other.degree:
            raise ValueError("cannot add forms of different degree")
        return Form(self.degree, self.coeffs + other.coeffs)

    def __sub__(self, other: "Form") -> "Form":
        if self.degree != other.degree:
            raise ValueError("cannot subtract forms of different degree")
        return Form(self.degree, self.coeffs - other.coeffs)

    def __mul__(self, scalar: float) -> "Form":
        return Form(self.degree, self.coeffs * float(scalar))

    __rmul__ = __mul__

    def __neg__(self) -> "Form":
        return Form(self.degree, -self.coeffs)

    def __getitem__(self, indices) -> float:
        return float(self.coeffs[BASIS_INDEX[self.degree][tuple(indices)]])

    def max_abs(self) -> float:
        return float(np.max(np.abs(self.coeffs))) if self.coeffs.size else 0.0

    def is_zero(self, tol: float = 0.0) -> bool:
        return bool(np.all(np.abs(self.coeffs) <= tol))

    def __repr__(self):
        terms = []
        for mono, c in zip(BASIS[self.degree], self.coeffs):
            if c != 0:
                name = "e" + "".join(str(i) for i in mono) if mono else "1"
                terms.append(f"{c:+g}*{name}")
        return f"Form({' '.join(terms) or '0'})"


def wedge(x: Form, y: Form) -> Form:
    """Graded-commutative exterior product; zero form when degrees exceed 6."""
    deg = x.degree + y.degree
    if deg > DIM:
        return Form(0)
    out = Form(deg)
    tbl = _wedge_table(x.degree, y.degree)
    xi = np.nonzero(x.coeffs)[0]
    yi = np.nonzero(y.coeffs)[0]
    for i in xi:
        row = tbl[i]
        ci = x.coeffs[i]
        for j in yi:
            ent = row[j]
            if ent is not None:
                pos, sign = ent
                out.coeffs[pos] += sign * ci * y.coeffs[j]
    return out


def wedge_all(*forms: Form) -> Form:
    out = forms[0]
    for f in forms[1:]:
        out = wedge(out, f)
    return out


def _d_monomial(mono: tuple) -> Form:
    out = Form(len(mono) + 1) if len(mono) < DIM else Form(0)
    if len(mono) >= DIM:
        return Form(0)
    for j, idx in enumerate(mono):
        dpair, dsign = COFRAME_DIFFERENTIAL[idx]
        rest = mono[:j] + mono[j + 1:]
        merged, sign = _merge(dpair, rest)
        if sign != 0:
            out.coeffs[BASIS_INDEX[len(mono) + 1][merged]] += ((-1) ** j) * dsign * sign
    return out


_D_MATRIX: dict = {}


def _d_matrix(k: int) -> np.ndarray:
    mat = _D_MATRIX.get(k)
    if mat is None:
        if k >= DIM:
            mat = np.zeros((1, DIMS[DIM]))
        else:
            mat = np.zeros((DIMS[k + 1], DIMS[k]))
            for n, mono in enumerate(BASIS[k]):
                mat[:, n] = _d_monomial(mono).coeffs
        _D_MATRIX[k] = mat
    return mat


def d(x: Form) -> Form:
    """Exterior derivative defined by the fixed structure constants."""
    if x.degree >= DIM:
        return Form(0)
    return Form(x.degree + 1, _d_matrix(x.degree) @ x.coeffs)


def contract(v, x: Form) -> Form:
    """Interior product v -| x for a tangent vector v.

    v is either a 1-based basis index or a length-6 component vector in the
    dual basis e_1..e_6.
    """
    if x.degree == 0:
        return Form(0)
    if np.isscalar(v):
        comps = np.zeros(DIM)
        comps[int(v) - 1] = 1.0
    else:
        comps = np.asarray(v, dtype=float)
    out = Form(x.degree - 1)
    for n, mono in enumerate(BASIS[x.degree]):
        c = x.coeffs[n]
        if c == 0:
            continue
        for j, idx in enumerate(mono):
            va = comps[idx - 1]
            if va != 0:
                rest = mono[:j] + mono[j + 1:]
                out.coeffs[BASIS_INDEX[x.degree - 1][rest]] += ((-1) ** j) * va * c
    return out


def pullback(M, x: Form) -> Form:
    """Apply the endomorphism M of the coframe (e^i -> sum_j M[i,j] e^j) to
    every slot of x.  Multiplicative over wedge; identity acts trivially."""
    M = np.asarray(M, dtype=float)
    if M.shape != (DIM, DIM):
        raise ValueError("endomorphism must be 6x6")
    if x.degree == 0:
        return x.copy()
    out = Form(x.degree)
    rows_cache = {}
    for n, mono in enumerate(BASIS[x.degree]):
        c = x.coeffs[n]
        if c == 0:
            continue
        rows = rows_cache.get(mono)
        if rows is None:
            rows = np.array([i - 1 for i in mono])
            rows_cache[mono] = rows
        sub = M[rows, :]
        for m, target in enumerate(BASIS[x.degree]):
            cols = np.array([j - 1 for j in target])
            out.coeffs[m] += c * np.linalg.det(sub[:, cols])
    return out


def _check_spd(g: np.ndarray):
    if g.shape != (DIM, DIM):
        raise ValueError("metric must be 6x6")
    if not np.allclose(g, g.T, atol=1e-10 * max(1.0, np.max(np.abs(g)))):
        raise ValueError("metric must be symmetric")
    if np.min(np.linalg.eigvalsh(0.5 * (g + g.T))) <= 0:
        raise ValueError("metric must be positive definite")


def _gram(ginv: np.ndarray, k: int) -> np.ndarray:
    """Inner product matrix on degree-k monomials induced by the inverse
    metric on covectors."""
    if k == 0:
        return np.ones((1, 1))
    basis = BASIS[k]
    n = len(basis)
    gram = np.empty((n, n))
    for i, I in enumerate(basis):
        ri = [a - 1 for a in I]
        for j, J in enumerate(basis):
            cj = [b - 1 for b in J]
            gram[i, j] = np.linalg.det(ginv[np.ix_(ri, cj)])
    return gram


# complement position and sign: e^I ^ e^{Ic} = sign * e123456
_COMPLEMENT: dict = {}


def _complement(k: int):
    comp = _COMPLEMENT.get(k)
    if comp is None:
        comp = []
        for mono in BASIS[k]:
            rest = tuple(i for i in range(1, DIM + 1) if i not in mono)
            _, sign = _merge(mono, rest)
            comp.append((BASIS_INDEX[DIM - k][rest], sign))
        _COMPLEMENT[k] = comp
    return comp


def hodge(g, x: Form) -> Form:
    """Riemannian Hodge star of x for the SPD coframe metric g, with
    positive volume form e123456."""
    g = np.asarray(g, dtype=float)
    _check_spd(g)
    ginv = np.linalg.inv(g)
    vol = np.sqrt(np.linalg.det(g))
    k = x.degree
    gx = _gram(ginv, k) @ x.coeffs
    out = Form(DIM - k)
    for n, (pos, sign) in enumerate(_complement(k)):
        out.coeffs[pos] = sign * vol * gx[n]
    return out


def form_inner(g, x: Form, y: Form) -> float:
    """Pointwise inner product of equal-degree forms induced by g, with
    orthonormal monomials of an orthonormal coframe having unit norm."""
    if x.degree != y.degree:
        raise ValueError("degree mismatch in form inner product")
    g = np.asarray(g, dtype=float)
    _check_spd(g)
    ginv = np.linalg.inv(g)
    return float(x.coeffs @ _gram(ginv, x.degree) @ y.coeffs)


def volume_coefficient(x: Form) -> float:
    """Coefficient of e123456 in a 6-form."""
    if x.degree != DIM:
        raise ValueError("not a 6-form")
    return float(x.coeffs[0])


def slot_apply(M, x: Form) -> Form:
    """Alternating tensor M.x with (M.x)(X1..Xk) = sum_i x(X1,..,M Xi,..,Xk)
    for the tangent endomorphism M (columns are images of e_a).

    Used as an oracle for closed-form slot formulas; computed by brute force
    over components."""
    M = np.asarray(M, dtype=float)
    k = x.degree
    if k == 0:
        return Form(0)
    # dense component tensor of x
    comp = np.zeros((DIM,) * k)
    for n, mono in enumerate(BASIS[k]):
        c = x.coeffs[n]
        if c == 0:
            continue
        idx0 = [i - 1 for i in mono]
        for perm in itertools.permutations(range(k)):
            sign = 1
            for i in range(k):
                for j in range(i + 1, k):
                    if perm[i] > perm[j]:
                        sign = -sign
            comp[tuple(idx0[p] for p in perm)] = sign * c
    out_comp = np.zeros_like(comp)
    for slot in range(k):
        out_comp += np.tensordot(comp, M, axes=([slot], [0])).transpose(
            tuple(range(slot)) + (k - 1,) + tuple(range(slot, k - 1))
        )
    out = Form(k)
    for n, mono in enumerate(BASIS[k]):
        out.coeffs[n] = out_comp[tuple(i - 1 for i in mono)]
    return out

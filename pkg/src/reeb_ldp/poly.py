"""Bivariate polynomials with exact coefficient-level calculus.

Polynomials are stored as sparse {(i, j): c} maps representing
sum c * x**i * y**j.  Differentiation and arithmetic are exact, so
gradients and Hessians of polynomial Hamiltonians carry no truncation
error.  Evaluation accepts scalars or numpy arrays and uses a Horner
scheme in y nested inside a Horner scheme in x.
"""

from __future__ import annotations

import numpy as np


class Poly2:
    """Sparse bivariate polynomial sum_{ij} c_ij x^i y^j."""

    __slots__ = ("coeffs", "_rows")

    def __init__(self, terms):
        """terms: iterable of (i, j, c) or a {(i, j): c} mapping."""
        coeffs: dict[tuple[int, int], float] = {}
        items = terms.items() if isinstance(terms, dict) else None
        if items is not None:
            for (i, j), c in items:
                coeffs[(int(i), int(j))] = coeffs.get((int(i), int(j)), 0.0) + float(c)
        else:
            for i, j, c in terms:
                if i < 0 or j < 0 or int(i) != i or int(j) != j:
                    raise ValueError(f"bad exponents ({i}, {j})")
                coeffs[(int(i), int(j))] = coeffs.get((int(i), int(j)), 0.0) + float(c)
        coeffs = {k: v for k, v in coeffs.items() if v != 0.0}
        self.coeffs = coeffs
        self._rows = self._build_rows(coeffs)

    @staticmethod
    def _build_rows(coeffs):
        # group by x-power: list of (i, [c_j descending in j]) for Horner in y
        by_i: dict[int, dict[int, float]] = {}
        for (i, j), c in coeffs.items():
            by_i.setdefault(i, {})[j] = c
        rows = []
        for i in sorted(by_i, reverse=True):
            jmap = by_i[i]
            jmax = max(jmap)
            dense = [jmap.get(j, 0.0) for j in range(jmax, -1, -1)]
            rows.append((i, dense))
        return rows

    def __call__(self, x, y):
        if not self._rows:
            if np.ndim(x) or np.ndim(y):
                return np.zeros(np.broadcast(x, y).shape)
            return 0.0
        # outer Horner over x powers (possibly with gaps)
        acc = None
        prev_i = None
        for i, dense in self._rows:
            inner = dense[0]
            for c in dense[1:]:
                inner = inner * y + c
            if acc is None:
                acc = inner
            else:
                acc = acc * x ** (prev_i - i) + inner
            prev_i = i
        if prev_i > 0:
            acc = acc * x ** prev_i
        return acc

    def diff(self, var):
        """Exact partial derivative, var in {'x', 'y'}."""
        out = {}
        for (i, j), c in self.coeffs.items():
            if var == "x":
                if i > 0:
                    out[(i - 1, j)] = out.get((i - 1, j), 0.0) + i * c
            elif var == "y":
                if j > 0:
                    out[(i, j - 1)] = out.get((i, j - 1), 0.0) + j * c
            else:
                raise ValueError("var must be 'x' or 'y'")
        return Poly2(out)

    def __add__(self, other):
        if isinstance(other, (int, float)):
            other = Poly2([(0, 0, float(other))])
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out.get(k, 0.0) + v
        return Poly2(out)

    __radd__ = __add__

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return Poly2({k: v * float(other) for k, v in self.coeffs.items()})
        out: dict[tuple[int, int], float] = {}
        for (i1, j1), c1 in self.coeffs.items():
            for (i2, j2), c2 in other.coeffs.items():
                k = (i1 + i2, j1 + j2)
                out[k] = out.get(k, 0.0) + c1 * c2
        return Poly2(out)

    __rmul__ = __mul__

    def __sub__(self, other):
        return self + (other * -1 if isinstance(other, Poly2) else -other)

    @property
    def degree(self):
        if not self.coeffs:
            return 0
        return max(i + j for i, j in self.coeffs)

    def is_zero(self):
        return not self.coeffs

    def terms(self):
        """Sorted [(i, j, c), ...] representation (round-trips via Poly2)."""
        return [(i, j, c) for (i, j), c in sorted(self.coeffs.items())]

    def __repr__(self):
        if not self.coeffs:
            return "Poly2(0)"
        parts = [f"{c:g}*x^{i}*y^{j}" for (i, j), c in sorted(self.coeffs.items())]
        return "Poly2(" + " + ".join(parts) + ")"


def poly_from_table(table):
    """Build a Poly2 from a [[i, j, c], ...] coefficient table."""
    return Poly2([(int(r[0]), int(r[1]), float(r[2])) for r in table])

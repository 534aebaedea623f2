"""Separable closed forms in (R, beta).

A form is a finite sum of terms

    coef * R**a * (1 + R)**(-b) * sin(beta)**m * cos(beta)**n

with real exponents. The class is closed under products and under the
operators D_R = R d/dR and D_beta = sin(2 beta) d/dbeta, so profile
fields and singular weights can be differentiated exactly, and the
angular integral of any term is a Beta function.
"""

from __future__ import annotations

import numpy as np
from scipy.special import beta as beta_fn

_DIGITS = 12


def _key(a, b, m, n):
    return tuple(round(float(v), _DIGITS) + 0.0 for v in (a, b, m, n))


class Form:
    __slots__ = ("terms",)

    def __init__(self, terms=None):
        self.terms: dict[tuple[float, float, float, float], float] = {}
        for key, coef in (terms or {}).items():
            self._add(key, coef)

    @classmethod
    def term(cls, coef=1.0, a=0.0, b=0.0, m=0.0, n=0.0) -> "Form":
        return cls({_key(a, b, m, n): float(coef)})

    @classmethod
    def constant(cls, value: float) -> "Form":
        return cls.term(value)

    def _add(self, key, coef):
        if coef == 0.0:
            return
        k = _key(*key)
        val = self.terms.get(k, 0.0) + coef
        if val == 0.0:
            self.terms.pop(k, None)
        else:
            self.terms[k] = val

    def copy(self) -> "Form":
        return Form(dict(self.terms))

    def __add__(self, other):
        if not isinstance(other, Form):
            other = Form.constant(float(other))
        out = self.copy()
        for key, coef in other.terms.items():
            out._add(key, coef)
        return out

    __radd__ = __add__

    def __neg__(self):
        return Form({k: -c for k, c in self.terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Form):
            s = float(other)
            return Form({k: s * c for k, c in self.terms.items()})
        out = Form()
        for (a1, b1, m1, n1), c1 in self.terms.items():
            for (a2, b2, m2, n2), c2 in other.terms.items():
                out._add((a1 + a2, b1 + b2, m1 + m2, n1 + n2), c1 * c2)
        return out

    __rmul__ = __mul__

    def __repr__(self):
        return f"Form({len(self.terms)} terms)"

    def dR(self, order: int = 1) -> "Form":
        out = self
        for _ in range(order):
            nxt = Form()
            for (a, b, m, n), c in out.terms.items():
                # R d/dR [R^a (1+R)^-b] = a R^a (1+R)^-b - b R^(a+1) (1+R)^-(b+1)
                nxt._add((a, b, m, n), a * c)
                nxt._add((a + 1, b + 1, m, n), -b * c)
            out = nxt
        return out

    def dbeta(self, order: int = 1) -> "Form":
        out = self
        for _ in range(order):
            nxt = Form()
            for (a, b, m, n), c in out.terms.items():
                # 2 sin cos d/dbeta [sin^m cos^n]
                nxt._add((a, b, m, n + 2), 2 * m * c)
                nxt._add((a, b, m + 2, n), -2 * n * c)
            out = nxt
        return out

    def __call__(self, R, beta):
        """Evaluate on the outer product of R and beta (or on broadcast arrays)."""
        R = np.asarray(R, dtype=float)
        beta = np.asarray(beta, dtype=float)
        if R.ndim == 1 and beta.ndim == 1:
            R, beta = R[:, None], beta[None, :]
        logR, log1pR = np.log(R), np.log1p(R)
        logs, logc = np.log(np.sin(beta)), np.log(np.cos(beta))
        out = np.zeros(np.broadcast_shapes(R.shape, beta.shape))
        for (a, b, m, n), c in self.terms.items():
            out = out + c * np.exp(a * logR - b * log1pR + m * logs + n * logc)
        return out

    def beta_integrals(self):
        """Exact int_0^{pi/2} sin^m cos^n dbeta for every term; inf if divergent."""
        out = []
        for (a, b, m, n), c in self.terms.items():
            if m <= -1 or n <= -1:
                out.append(np.inf)
            else:
                out.append(0.5 * beta_fn((m + 1) / 2, (n + 1) / 2))
        return np.array(out)

    def radial_factors(self, R):
        """Matrix (n_terms, len(R)) of coef * R^a (1+R)^-b."""
        R = np.asarray(R, dtype=float)
        logR, log1pR = np.log(R), np.log1p(R)
        return np.array([c * np.exp(a * logR - b * log1pR) for (a, b, _, _), c in self.terms.items()]).reshape(
            len(self.terms), R.size
        )

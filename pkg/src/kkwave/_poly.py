"""Minimal exact multivariate polynomial arithmetic.

Used by the null-form commutator verifier and the divergence-identity checks,
where we need Z(Q(phi,psi)) expanded exactly on polynomial trial fields. Only
the handful of operations those checks need: ring arithmetic, differentiation,
evaluation. Coefficients are floats (the trial families use small integers, so
all arithmetic below degree ~12 is exact in double precision).
"""

from __future__ import annotations


class Poly:
    """Polynomial in ``nvars`` variables, stored as {exponent tuple: coeff}."""

    __slots__ = ("nvars", "coef")

    def __init__(self, nvars, coef=None):
        self.nvars = nvars
        self.coef = {}
        if coef:
            for mono, c in coef.items():
                if c != 0.0:
                    self.coef[mono] = float(c)

    @classmethod
    def const(cls, value, nvars):
        return cls(nvars, {(0,) * nvars: value})

    @classmethod
    def var(cls, index, nvars):
        mono = tuple(1 if i == index else 0 for i in range(nvars))
        return cls(nvars, {mono: 1.0})

    @classmethod
    def zero(cls, nvars):
        return cls(nvars)

    # ------------------------------------------------------------------
    # ring operations
    # ------------------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, Poly):
            if other.nvars != self.nvars:
                raise ValueError("mixed variable counts")
            return other
        return Poly.const(float(other), self.nvars)

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.coef)
        for mono, c in other.coef.items():
            acc = out.get(mono, 0.0) + c
            if acc == 0.0:
                out.pop(mono, None)
            else:
                out[mono] = acc
        return Poly(self.nvars, out)

    __radd__ = __add__

    def __neg__(self):
        return Poly(self.nvars, {m: -c for m, c in self.coef.items()})

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if not isinstance(other, Poly):
            if other == 0:
                return Poly.zero(self.nvars)
            return Poly(self.nvars, {m: c * other for m, c in self.coef.items()})
        if other.nvars != self.nvars:
            raise ValueError("mixed variable counts")
        out = {}
        for m1, c1 in self.coef.items():
            for m2, c2 in other.coef.items():
                mono = tuple(a + b for a, b in zip(m1, m2))
                acc = out.get(mono, 0.0) + c1 * c2
                if acc == 0.0:
                    out.pop(mono, None)
                else:
                    out[mono] = acc
        return Poly(self.nvars, out)

    __rmul__ = __mul__

    # ------------------------------------------------------------------
    # calculus / evaluation
    # ------------------------------------------------------------------
    def diff(self, index):
        out = {}
        for mono, c in self.coef.items():
            e = mono[index]
            if e == 0:
                continue
            new = list(mono)
            new[index] = e - 1
            out[tuple(new)] = c * e
        return Poly(self.nvars, out)

    def eval(self, point):
        total = 0.0
        for mono, c in self.coef.items():
            term = c
            for x, e in zip(point, mono):
                if e:
                    term *= x ** e
            total += term
        return total

    @property
    def is_zero(self):
        return not self.coef

    def max_abs_coeff(self):
        return max((abs(c) for c in self.coef.values()), default=0.0)

    def __repr__(self):
        if not self.coef:
            return "Poly(0)"
        parts = [f"{c:+g}*x^{m}" for m, c in sorted(self.coef.items())]
        return "Poly(" + " ".join(parts) + ")"

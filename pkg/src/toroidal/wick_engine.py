from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from .root_data import (
    CBAR,
    CBAR_STAR,
    EPS,
    EPSBAR,
    Atom,
    Coeff,
    ConfigError,
    LatticeContext,
    cbar,
    cbar_star,
    eps,
    eps_star,
    epsbar,
    epsbar_star,
    format_linear,
    ghost,
    pair_atoms,
)

ZERO = Coeff(0)
ONE = Coeff(1)

MODES = ("strict", "full")

_NULL_KINDS = (CBAR, CBAR_STAR)


class ExprError(ValueError):
    pass


class LinField:
    """Linear combination of atomic fermion fields (same conformal weight)."""

    __slots__ = ("_terms",)

    def __init__(self, terms: dict[Atom, Coeff] | None = None):
        clean: dict[Atom, Coeff] = {}
        if terms:
            for atom, val in terms.items():
                c = val if isinstance(val, Coeff) else Coeff(val)
                if c:
                    clean[atom] = c
        self._terms = clean

    @classmethod
    def from_atom(cls, atom: Atom) -> LinField:
        return cls({atom: ONE})

    def items(self):
        return self._terms.items()

    def is_zero(self) -> bool:
        return not self._terms

    def __add__(self, other):
        if not isinstance(other, LinField):
            return NotImplemented
        out = dict(self._terms)
        for atom, val in other._terms.items():
            out[atom] = out.get(atom, ZERO) + val
        return LinField(out)

    def __sub__(self, other):
        if not isinstance(other, LinField):
            return NotImplemented
        out = dict(self._terms)
        for atom, val in other._terms.items():
            out[atom] = out.get(atom, ZERO) - val
        return LinField(out)

    def __neg__(self):
        return LinField({a: -v for a, v in self._terms.items()})

    def __rmul__(self, scalar):
        c = Coeff._coerce(scalar)
        if c is None:
            return NotImplemented
        return LinField({a: c * v for a, v in self._terms.items()})

    __mul__ = __rmul__

    def __eq__(self, other):
        if not isinstance(other, LinField):
            return NotImplemented
        return self._terms == other._terms

    def __str__(self):
        atoms = sorted(self._terms, key=lambda a: a.sort_key)
        return format_linear((self._terms[a], a.expr_name()) for a in atoms)

    def __repr__(self):
        return f"LinField<{self}>"


def lin(atom: Atom) -> LinField:
    return LinField.from_atom(atom)


def beta_field(ctx: LatticeContext, star: bool = False) -> LinField:
    # beta = -cbar + eps_1 (types A, B, D), beta = -sqrt2*cbar + eps_1 (type C)
    coeff = -Coeff(0, 1) if ctx.typ == "C" else -ONE
    if star:
        return LinField({cbar_star(): coeff, eps_star(1): ONE})
    return LinField({cbar(): coeff, eps(1): ONE})


def betabar_field(ctx: LatticeContext, star: bool = False) -> LinField:
    if ctx.typ != "C":
        raise ExprError("betabar only exists in type C")
    coeff = -Coeff(0, 1)
    if star:
        return LinField({cbar_star(): coeff, epsbar_star(1): ONE})
    return LinField({cbar(): coeff, epsbar(1): ONE})


def pair_lin(u: LinField, v: LinField) -> Coeff:
    total = ZERO
    for au, cu in u.items():
        for av, cv in v.items():
            p = pair_atoms(au, av)
            if p:
                total = total + cu * cv * p
    return total


@dataclass(frozen=True)
class QuadMono:
    u: Atom
    v: Atom

    @property
    def sort_key(self):
        return (self.u.sort_key, self.v.sort_key)

    def is_null(self) -> bool:
        return self.u.kind in _NULL_KINDS or self.v.kind in _NULL_KINDS

    def __str__(self):
        return f":{self.u.expr_name()} {self.v.expr_name()}:"


def quad_canon(u: Atom, v: Atom) -> tuple[int, QuadMono | None]:
    """Canonicalize :u v: to increasing label order; :u u: = 0."""
    if u == v:
        return 0, None
    if u < v:
        return 1, QuadMono(u, v)
    return -1, QuadMono(v, u)


class LocalField:
    """id_part + sum of normal-ordered quadratic monomials."""

    __slots__ = ("_quad", "_ident")

    def __init__(self, quad: dict[QuadMono, Coeff] | None = None, ident=ZERO):
        clean: dict[QuadMono, Coeff] = {}
        if quad:
            for mono, val in quad.items():
                c = val if isinstance(val, Coeff) else Coeff(val)
                if c:
                    clean[mono] = c
        self._quad = clean
        self._ident = ident if isinstance(ident, Coeff) else Coeff(ident)

    @property
    def id_part(self) -> Coeff:
        return self._ident

    def quad_items(self):
        return self._quad.items()

    def quad_coeff(self, mono: QuadMono) -> Coeff:
        return self._quad.get(mono, ZERO)

    def is_zero(self) -> bool:
        return not self._quad and not self._ident

    def __add__(self, other):
        if not isinstance(other, LocalField):
            return NotImplemented
        out = dict(self._quad)
        for mono, val in other._quad.items():
            out[mono] = out.get(mono, ZERO) + val
        return LocalField(out, self._ident + other._ident)

    def __sub__(self, other):
        if not isinstance(other, LocalField):
            return NotImplemented
        out = dict(self._quad)
        for mono, val in other._quad.items():
            out[mono] = out.get(mono, ZERO) - val
        return LocalField(out, self._ident - other._ident)

    def __neg__(self):
        return LocalField({m: -v for m, v in self._quad.items()}, -self._ident)

    def __rmul__(self, scalar):
        c = Coeff._coerce(scalar)
        if c is None:
            return NotImplemented
        return LocalField({m: c * v for m, v in self._quad.items()}, c * self._ident)

    __mul__ = __rmul__

    def __eq__(self, other):
        if not isinstance(other, LocalField):
            return NotImplemented
        return self._quad == other._quad and self._ident == other._ident

    def __str__(self):
        monos = sorted(self._quad, key=lambda m: m.sort_key)
        terms = [(self._ident, "")] if self._ident else []
        terms += [(self._quad[m], str(m)) for m in monos]
        return format_linear(terms)

    def __repr__(self):
        return f"LocalField<{self}>"


def zero_field() -> LocalField:
    return LocalField()


def normal_quad(u: LinField, v: LinField) -> LocalField:
    """Normal-ordered product :u(z)v(z): of two linear fields."""
    out: dict[QuadMono, Coeff] = {}
    for au, cu in u.items():
        for av, cv in v.items():
            sign, mono = quad_canon(au, av)
            if not sign:
                continue
            c = cu * cv * sign
            acc = out.get(mono, ZERO) + c
            if acc:
                out[mono] = acc
            elif mono in out:
                del out[mono]
    return LocalField(out)


@dataclass
class BracketResult:
    delta_part: LocalField
    ddelta_part: Coeff

    def is_zero(self) -> bool:
        return self.delta_part.is_zero() and not self.ddelta_part


def bracket(A: LocalField, B: LocalField) -> BracketResult:
    """Commutator [A(z), B(w)] = delta_part*delta(z-w) + ddelta_part*d_w delta(z-w).

    Identity components commute with everything and contribute nothing.
    """
    delta: dict[QuadMono, Coeff] = {}
    ddelta = ZERO

    def add(mono_sign, mono, coeff):
        if not mono_sign or not coeff:
            return
        acc = delta.get(mono, ZERO) + mono_sign * coeff
        if acc:
            delta[mono] = acc
        elif mono in delta:
            del delta[mono]

    for ma, ca in A.quad_items():
        r1, r2 = ma.u, ma.v
        for mb, cb in B.quad_items():
            s1, s2 = mb.u, mb.v
            c = ca * cb
            p12 = pair_atoms(r1, s2)
            p11 = pair_atoms(r1, s1)
            p21 = pair_atoms(r2, s1)
            p22 = pair_atoms(r2, s2)
            if p12:
                sg, mono = quad_canon(r2, s1)
                add(sg * p12, mono, c)
            if p11:
                sg, mono = quad_canon(r2, s2)
                add(-sg * p11, mono, c)
            if p21:
                sg, mono = quad_canon(r1, s2)
                add(sg * p21, mono, c)
            if p22:
                sg, mono = quad_canon(r1, s1)
                add(-sg * p22, mono, c)
            central = p12 * p21 - p11 * p22
            if central:
                ddelta = ddelta + c * central
    return BracketResult(LocalField(delta), ddelta)


def quad_pairing(A: LocalField, B: LocalField) -> Coeff:
    """<A, B>: the d_w delta coefficient of [A(z), B(w)]."""
    total = ZERO
    for ma, ca in A.quad_items():
        for mb, cb in B.quad_items():
            central = (pair_atoms(ma.u, mb.v) * pair_atoms(ma.v, mb.u)
                       - pair_atoms(ma.u, mb.u) * pair_atoms(ma.v, mb.v))
            if central:
                total = total + ca * cb * central
    return total


def is_null(F: LocalField) -> bool:
    """True when F lies in the ideal spanned by cbar/cbar* monomials."""
    if F.id_part:
        return False
    return all(mono.is_null() for mono, _ in F.quad_items())


def mod_null(F: LocalField) -> LocalField:
    """Project away every monomial containing cbar or cbar*."""
    return LocalField({m: c for m, c in F.quad_items() if not m.is_null()},
                      F.id_part)


def has_null_part(F: LocalField) -> bool:
    return any(mono.is_null() for mono, _ in F.quad_items())


def apply_mode(F: LocalField, mode: str) -> LocalField:
    if mode not in MODES:
        raise ConfigError(f"unknown mode {mode!r}; expected one of {MODES}")
    return mod_null(F) if mode == "strict" else F


def ad_power(X: LocalField, Y: LocalField, power: int, mode: str = "full") -> BracketResult:
    """p-fold [X, [X, ... [X, Y]]], feeding delta parts forward.

    Scalar d_delta terms of intermediate steps bracket to zero, so only the
    final step's central coefficient survives.
    """
    if power < 1:
        raise ValueError("power must be >= 1")
    current = apply_mode(Y, mode)
    ddelta = ZERO
    for _ in range(power):
        res = bracket(X, current)
        current = apply_mode(res.delta_part, mode)
        ddelta = res.ddelta_part
    return BracketResult(current, ddelta)


### Expression syntax ###

_TOKEN_RE = re.compile(
    r"\s*(?:(?P<name>sqrt2|epsbar\*?|eps\*?|cbar\*?|betabar\*?|beta\*?|e)"
    r"|(?P<int>\d+)"
    r"|(?P<op>[:()+\-*/]))")

_ATOM_NAMES = {"eps", "eps*", "epsbar", "epsbar*", "cbar", "cbar*", "e",
               "beta", "beta*", "betabar", "betabar*"}


def _tokenize(text: str):
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            rest = text[pos:].lstrip()
            if not rest:
                break
            raise ExprError(f"cannot tokenize {rest[:12]!r} at position {pos}")
        if m.group("name"):
            out.append(("name", m.group("name"), pos))
        elif m.group("int"):
            out.append(("int", int(m.group("int")), pos))
        else:
            out.append((m.group("op"), m.group("op"), pos))
        pos = m.end()
    out.append(("end", None, len(text)))
    return out


class _Parser:
    """Recursive descent over the ope expression grammar.

    expr   := ['-'] term (('+'|'-') term)*
    term   := factor ('*' factor)*  [at most one quadratic factor]
    factor := quad | scalar | '(' expr ')'
    quad   := ':' lin lin ':'
    lin    := name ['(' int ')']
    scalar := int ['/' int] | 'sqrt2'
    """

    def __init__(self, ctx: LatticeContext, text: str):
        self.ctx = ctx
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.toks[self.i]

    def take(self, kind=None):
        tok = self.toks[self.i]
        if kind is not None and tok[0] != kind:
            raise ExprError(f"expected {kind!r} at position {tok[2]}, got {tok[1]!r}")
        self.i += 1
        return tok

    def parse(self) -> LocalField:
        value = self.expr()
        tok = self.peek()
        if tok[0] != "end":
            raise ExprError(f"unexpected {tok[1]!r} at position {tok[2]}")
        scalar, field = value
        if field is None:
            return LocalField(ident=scalar)
        return scalar * field

    def expr(self):
        negate = False
        if self.peek()[0] == "-":
            self.take()
            negate = True
        value = self.term()
        if negate:
            value = (-value[0], value[1])
        while self.peek()[0] in ("+", "-"):
            op = self.take()[0]
            rhs = self.term()
            value = self._combine(value, rhs, op)
        return value

    @staticmethod
    def _to_field(value) -> LocalField:
        scalar, field = value
        if field is None:
            return LocalField(ident=scalar)
        return scalar * field

    def _combine(self, lhs, rhs, op):
        if lhs[1] is None and rhs[1] is None:
            return (lhs[0] + rhs[0] if op == "+" else lhs[0] - rhs[0], None)
        left = self._to_field(lhs)
        right = self._to_field(rhs)
        return (ONE, left + right if op == "+" else left - right)

    def term(self):
        scalar, field = self.factor()
        while self.peek()[0] == "*":
            self.take()
            s2, f2 = self.factor()
            # a parenthesized scalar expression is still just a scalar
            if f2 is not None and not f2._quad:
                s2, f2 = s2 * f2.id_part, None
            if field is not None and not field._quad:
                scalar, field = scalar * field.id_part, None
            if field is not None and f2 is not None:
                raise ExprError("cannot multiply two quadratic fields")
            scalar = scalar * s2
            field = field if field is not None else f2
        return (scalar, field)

    def factor(self):
        tok = self.peek()
        if tok[0] == ":":
            return (ONE, self.quad())
        if tok[0] == "(":
            self.take()
            value = self.expr()
            self.take(")")
            return value
        if tok[0] == "int":
            return (self.scalar(), None)
        if tok[0] == "name" and tok[1] == "sqrt2":
            self.take()
            return (Coeff(0, 1), None)
        raise ExprError(f"expected a field or scalar at position {tok[2]}")

    def scalar(self) -> Coeff:
        num = self.take("int")[1]
        if self.peek()[0] == "/":
            self.take()
            den = self.take("int")[1]
            if den == 0:
                raise ExprError("zero denominator")
            return Coeff(Fraction(num, den))
        return Coeff(num)

    def quad(self) -> LocalField:
        self.take(":")
        u = self.lin()
        v = self.lin()
        self.take(":")
        return normal_quad(u, v)

    def lin(self) -> LinField:
        tok = self.take("name")
        name = tok[1]
        if name not in _ATOM_NAMES:
            raise ExprError(f"unknown field name {name!r} at position {tok[2]}")
        index = None
        if self.peek()[0] == "(":
            self.take()
            index = self.take("int")[1]
            self.take(")")
        return self._resolve(name, index, tok[2])

    def _resolve(self, name: str, index: int | None, pos: int) -> LinField:
        ctx = self.ctx
        indexed = name.startswith("eps")
        if indexed and index is None:
            raise ExprError(f"{name} needs an index at position {pos}")
        if not indexed and index is not None:
            raise ExprError(f"{name} takes no index at position {pos}")
        if indexed and not 1 <= index <= ctx.n:
            raise ExprError(f"index {index} out of range 1..{ctx.n} at position {pos}")
        if name.startswith("epsbar") and ctx.typ != "C":
            raise ExprError(f"{name} only exists in type C")
        if name.startswith("betabar") and ctx.typ != "C":
            raise ExprError(f"{name} only exists in type C")
        if name == "e" and ctx.typ != "B":
            raise ExprError("the ghost field e only exists in type B")
        if name == "eps":
            return lin(eps(index))
        if name == "eps*":
            return lin(eps_star(index))
        if name == "epsbar":
            return lin(epsbar(index))
        if name == "epsbar*":
            return lin(epsbar_star(index))
        if name == "cbar":
            return lin(cbar())
        if name == "cbar*":
            return lin(cbar_star())
        if name == "e":
            return lin(ghost())
        if name == "beta":
            return beta_field(ctx, star=False)
        if name == "beta*":
            return beta_field(ctx, star=True)
        if name == "betabar":
            return betabar_field(ctx, star=False)
        return betabar_field(ctx, star=True)


def parse_field(ctx: LatticeContext, text: str) -> LocalField:
    return _Parser(ctx, text).parse()


def format_field(F: LocalField) -> str:
    return str(F)


def format_bracket(res: BracketResult) -> str:
    return f"delta = {res.delta_part}\nd_delta = {res.ddelta_part}"

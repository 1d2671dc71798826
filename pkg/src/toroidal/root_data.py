from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import total_ordering

ALG_TYPES = ("A", "B", "C", "D")

_MIN_RANK = {"A": 2, "B": 2, "C": 2, "D": 4}


class ConfigError(ValueError):
    pass


class Coeff:
    """Exact scalar a + b*sqrt(2) with rational a, b."""

    __slots__ = ("_a", "_b")

    def __init__(self, a=0, b=0):
        self._a = a if isinstance(a, Fraction) else Fraction(a)
        self._b = b if isinstance(b, Fraction) else Fraction(b)

    @property
    def a(self) -> Fraction:
        return self._a

    @property
    def b(self) -> Fraction:
        return self._b

    @classmethod
    def sqrt2(cls) -> Coeff:
        return cls(0, 1)

    @staticmethod
    def _coerce(other):
        if isinstance(other, Coeff):
            return other
        if isinstance(other, (int, Fraction)):
            return Coeff(other)
        return None

    def is_zero(self) -> bool:
        return not self._a and not self._b

    def conj(self) -> Coeff:
        return Coeff(self._a, -self._b)

    def __bool__(self) -> bool:
        return bool(self._a) or bool(self._b)

    def __add__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return Coeff(self._a + o._a, self._b + o._b)

    __radd__ = __add__

    def __sub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return Coeff(self._a - o._a, self._b - o._b)

    def __rsub__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return Coeff(o._a - self._a, o._b - self._b)

    def __neg__(self) -> Coeff:
        return Coeff(-self._a, -self._b)

    def __mul__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return Coeff(self._a * o._a + 2 * self._b * o._b,
                     self._a * o._b + self._b * o._a)

    __rmul__ = __mul__

    def inverse(self) -> Coeff:
        norm = self._a * self._a - 2 * self._b * self._b
        if not norm:
            raise ZeroDivisionError("division by zero in Q(sqrt2)")
        return Coeff(self._a / norm, -self._b / norm)

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self * o.inverse()

    def __rtruediv__(self, other):
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return o * self.inverse()

    def __pow__(self, exponent: int):
        if not isinstance(exponent, int):
            return NotImplemented
        if exponent < 0:
            return self.inverse() ** (-exponent)
        out = Coeff(1)
        base = self
        e = exponent
        while e:
            if e & 1:
                out = out * base
            base = base * base
            e >>= 1
        return out

    def __eq__(self, other) -> bool:
        o = self._coerce(other)
        if o is None:
            return NotImplemented
        return self._a == o._a and self._b == o._b

    def __hash__(self):
        if not self._b:
            return hash(self._a)
        return hash((self._a, self._b))

    def __repr__(self) -> str:
        return f"Coeff({self._a!r}, {self._b!r})"

    def __str__(self) -> str:
        if self.is_zero():
            return "0"
        parts = []
        if self._a:
            parts.append(str(self._a))
        if self._b:
            if self._b == 1:
                s = "sqrt2"
            elif self._b == -1:
                s = "-sqrt2"
            else:
                s = f"{self._b}*sqrt2"
            if parts and not s.startswith("-"):
                parts.append("+" + s)
            else:
                parts.append(s)
        return "".join(parts)


ZERO = Coeff(0)
ONE = Coeff(1)
SQRT2 = Coeff(0, 1)
HALF = Coeff(Fraction(1, 2))
INV_SQRT2 = Coeff(0, Fraction(1, 2))

# Atom kinds, in a fixed global band order.  The canonical total order on
# atomic labels is cbar < cbar* < eps(1) < eps*(1) < ... < eps(n) < eps*(n)
# < epsbar(1) < epsbar*(1) < ... < epsbar(n) < epsbar*(n) < e.
CBAR, CBAR_STAR, EPS, EPS_STAR, EPSBAR, EPSBAR_STAR, GHOST = range(7)

_BAND = {CBAR: 0, CBAR_STAR: 0, EPS: 1, EPS_STAR: 1,
         EPSBAR: 2, EPSBAR_STAR: 2, GHOST: 3}
_STARRED = {CBAR_STAR, EPS_STAR, EPSBAR_STAR}


@total_ordering
@dataclass(frozen=True)
class Atom:
    kind: int
    index: int = 0

    @property
    def sort_key(self) -> tuple[int, int, int]:
        return (_BAND[self.kind], self.index, 1 if self.kind in _STARRED else 0)

    @property
    def starred(self) -> bool:
        return self.kind in _STARRED

    def partner(self) -> Atom | None:
        # The unique atom this one pairs against, if any.
        if self.kind == EPS:
            return Atom(EPS_STAR, self.index)
        if self.kind == EPS_STAR:
            return Atom(EPS, self.index)
        if self.kind == EPSBAR:
            return Atom(EPSBAR_STAR, self.index)
        if self.kind == EPSBAR_STAR:
            return Atom(EPSBAR, self.index)
        if self.kind == GHOST:
            return self
        return None

    def expr_name(self) -> str:
        if self.kind == CBAR:
            return "cbar"
        if self.kind == CBAR_STAR:
            return "cbar*"
        if self.kind == EPS:
            return f"eps({self.index})"
        if self.kind == EPS_STAR:
            return f"eps*({self.index})"
        if self.kind == EPSBAR:
            return f"epsbar({self.index})"
        if self.kind == EPSBAR_STAR:
            return f"epsbar*({self.index})"
        return "e"

    def dump_name(self) -> str:
        if self.kind == CBAR:
            return "cbar"
        if self.kind == CBAR_STAR:
            return "cbar*"
        if self.kind == EPS:
            return f"eps{self.index}"
        if self.kind == EPS_STAR:
            return f"eps*{self.index}"
        if self.kind == EPSBAR:
            return f"epsbar{self.index}"
        if self.kind == EPSBAR_STAR:
            return f"epsbar*{self.index}"
        return "e"

    def __lt__(self, other):
        if not isinstance(other, Atom):
            return NotImplemented
        return self.sort_key < other.sort_key


def eps(i: int) -> Atom:
    return Atom(EPS, i)


def eps_star(i: int) -> Atom:
    return Atom(EPS_STAR, i)


def epsbar(i: int) -> Atom:
    return Atom(EPSBAR, i)


def epsbar_star(i: int) -> Atom:
    return Atom(EPSBAR_STAR, i)


def cbar() -> Atom:
    return Atom(CBAR)


def cbar_star() -> Atom:
    return Atom(CBAR_STAR)


def ghost() -> Atom:
    return Atom(GHOST)


def pair_atoms(u: Atom, v: Atom) -> int:
    """Contraction value <u, v> between two atomic labels (0 or +-1)."""
    if u.kind == GHOST and v.kind == GHOST:
        return -1
    if u.index != v.index:
        return 0
    k1, k2 = u.kind, v.kind
    if (k1, k2) in ((EPS, EPS_STAR), (EPS_STAR, EPS),
                    (EPSBAR, EPSBAR_STAR), (EPSBAR_STAR, EPSBAR)):
        return 1
    return 0


def format_linear(terms) -> str:
    """Render [(coeff, symbol), ...] as 'a*x + y - b*z'."""
    parts = []
    for c, sym in terms:
        if not c:
            continue
        if not sym:
            cs = str(c)
            if ("+" in cs[1:]) or ("-" in cs[1:]):
                cs = "(" + cs + ")"
            text = cs
        elif c == ONE:
            text = sym
        elif c == -ONE:
            text = "-" + sym
        else:
            cs = str(c)
            if ("+" in cs[1:]) or ("-" in cs[1:]):
                cs = "(" + cs + ")"
            text = f"{cs}*{sym}"
        if parts and not text.startswith("-"):
            parts.append(" + " + text)
        elif parts:
            parts.append(" - " + text[1:])
        else:
            parts.append(text)
    return "".join(parts) if parts else "0"


class LatticeVector:
    """Vector in the weight lattice, over basis {eps_i, cbar, dbar}."""

    __slots__ = ("_coords",)

    def __init__(self, coords: dict | None = None):
        clean = {}
        if coords:
            for key, val in coords.items():
                c = val if isinstance(val, Coeff) else Coeff(val)
                if c:
                    clean[key] = c
        self._coords = clean

    def coord(self, key: str) -> Coeff:
        return self._coords.get(key, ZERO)

    def items(self):
        return self._coords.items()

    def is_zero(self) -> bool:
        return not self._coords

    def __add__(self, other):
        if not isinstance(other, LatticeVector):
            return NotImplemented
        out = dict(self._coords)
        for key, val in other._coords.items():
            out[key] = out.get(key, ZERO) + val
        return LatticeVector(out)

    def __sub__(self, other):
        if not isinstance(other, LatticeVector):
            return NotImplemented
        out = dict(self._coords)
        for key, val in other._coords.items():
            out[key] = out.get(key, ZERO) - val
        return LatticeVector(out)

    def __neg__(self):
        return LatticeVector({k: -v for k, v in self._coords.items()})

    def __rmul__(self, scalar):
        c = Coeff._coerce(scalar)
        if c is None:
            return NotImplemented
        return LatticeVector({k: c * v for k, v in self._coords.items()})

    __mul__ = __rmul__

    def form(self, other: LatticeVector) -> Coeff:
        # (eps_i|eps_j) = delta_ij, (cbar|dbar) = 1, everything else 0.
        total = ZERO
        for key, val in self._coords.items():
            if key == "cbar":
                total = total + val * other.coord("dbar")
            elif key == "dbar":
                total = total + val * other.coord("cbar")
            else:
                total = total + val * other.coord(key)
        return total

    def __eq__(self, other):
        if not isinstance(other, LatticeVector):
            return NotImplemented
        return self._coords == other._coords

    def __hash__(self):
        return hash(frozenset(self._coords.items()))

    def __str__(self):
        def order(key: str):
            if key == "cbar":
                return (0, 0)
            if key == "dbar":
                return (1, 0)
            return (2, int(key[3:]))

        keys = sorted(self._coords, key=order)
        return format_linear((self._coords[k], k) for k in keys)

    def __repr__(self):
        return f"LatticeVector({self._coords!r})"


def eps_vec(i: int) -> LatticeVector:
    return LatticeVector({f"eps{i}": ONE})


def cbar_vec() -> LatticeVector:
    return LatticeVector({"cbar": ONE})


def dbar_vec() -> LatticeVector:
    return LatticeVector({"dbar": ONE})


def _solve_linear(rows: list[list[Coeff]], rhs: list[Coeff]) -> list[Coeff]:
    """Solve a small exact linear system by Gaussian elimination."""
    m = len(rows)
    k = len(rows[0]) if m else 0
    aug = [list(row) + [r] for row, r in zip(rows, rhs)]
    piv_rows = []
    row = 0
    for col in range(k):
        pivot = None
        for i in range(row, m):
            if aug[i][col]:
                pivot = i
                break
        if pivot is None:
            continue
        aug[row], aug[pivot] = aug[pivot], aug[row]
        inv = aug[row][col].inverse()
        aug[row] = [inv * x for x in aug[row]]
        for i in range(m):
            if i != row and aug[i][col]:
                factor = aug[i][col]
                aug[i] = [x - factor * y for x, y in zip(aug[i], aug[row])]
        piv_rows.append(col)
        row += 1
    for i in range(row, m):
        if aug[i][k]:
            raise ConfigError("inconsistent mark system")
    if len(piv_rows) != k:
        raise ConfigError("underdetermined mark system")
    sol = [ZERO] * k
    for r, col in enumerate(piv_rows):
        sol[col] = aug[r][k]
    return sol


@dataclass(eq=False)
class LatticeContext:
    """Immutable bundle of everything a (type, rank) configuration fixes."""

    typ: str
    n: int
    atoms: tuple[Atom, ...]
    simple: tuple[LatticeVector, ...]
    alpha_max: LatticeVector
    beta: LatticeVector
    marks: tuple[int, ...]
    dvec: tuple[Fraction, ...]
    cartan: tuple[tuple[int, ...], ...]

    @property
    def num_nodes(self) -> int:
        return len(self.simple)

    @property
    def alphabet_size(self) -> int:
        return len(self.atoms)

    def rank_of(self, atom: Atom) -> int:
        return self._rank[atom]

    def cartan_entry(self, i: int, j: int) -> int:
        return self.cartan[i][j]

    def __post_init__(self):
        self._rank = {a: r for r, a in enumerate(self.atoms)}


def build_lattice(typ: str, n: int) -> LatticeContext:
    if typ not in ALG_TYPES:
        raise ConfigError(f"unknown algebra type {typ!r}; expected one of {ALG_TYPES}")
    if not isinstance(n, int) or n < _MIN_RANK[typ]:
        raise ConfigError(f"type {typ} needs integer rank >= {_MIN_RANK[typ]}, got {n!r}")

    atoms = [cbar(), cbar_star()]
    for i in range(1, n + 1):
        atoms.append(eps(i))
        atoms.append(eps_star(i))
    if typ == "C":
        for i in range(1, n + 1):
            atoms.append(epsbar(i))
            atoms.append(epsbar_star(i))
    if typ == "B":
        atoms.append(ghost())
    atoms.sort(key=lambda a: a.sort_key)

    simple: list[LatticeVector] = []
    if typ == "A":
        # Finite type A_{n-1}: nodes 1..n-1.
        for i in range(1, n):
            simple.append(eps_vec(i) - eps_vec(i + 1))
        alpha_max = eps_vec(1) - eps_vec(n)
    elif typ in ("B", "D"):
        for i in range(1, n):
            simple.append(eps_vec(i) - eps_vec(i + 1))
        simple.append(eps_vec(n) if typ == "B" else eps_vec(n - 1) + eps_vec(n))
        alpha_max = eps_vec(1) + eps_vec(2)
    else:
        for i in range(1, n):
            simple.append(INV_SQRT2 * (eps_vec(i) - eps_vec(i + 1)))
        simple.append(SQRT2 * eps_vec(n))
        alpha_max = SQRT2 * eps_vec(1)

    alpha0 = cbar_vec() - alpha_max
    simple.insert(0, alpha0)

    if typ == "C":
        beta = -SQRT2 * cbar_vec() + eps_vec(1)
    else:
        beta = -ONE * cbar_vec() + eps_vec(1)

    k = len(simple)
    cartan_rows = []
    dvec = []
    for i in range(k):
        norm = simple[i].form(simple[i])
        if norm.b or norm.a <= 0:
            raise ConfigError(f"simple root {i} has bad norm {norm}")
        dvec.append(norm.a / 2)
        row = []
        for j in range(k):
            q = (2 * simple[i].form(simple[j])) / norm
            if q.b or q.a.denominator != 1:
                raise ConfigError(f"non-integral cartan entry a[{i}][{j}] = {q}")
            row.append(int(q.a))
        cartan_rows.append(tuple(row))

    # Marks: unique a_i with a_0 = 1 and sum a_i alpha_i = cbar, i.e.
    # sum_{i>=1} a_i alpha_i = alpha_max.
    keys = sorted({key for v in simple for key, _ in v.items()})
    rows = [[simple[i].coord(key) for i in range(1, k)] for key in keys]
    rhs = [alpha_max.coord(key) for key in keys]
    sol = _solve_linear(rows, rhs)
    marks = [1]
    for q in sol:
        if q.b or q.a.denominator != 1 or q.a < 0:
            raise ConfigError(f"non-integral mark {q}")
        marks.append(int(q.a))

    return LatticeContext(
        typ=typ,
        n=n,
        atoms=tuple(atoms),
        simple=tuple(simple),
        alpha_max=alpha_max,
        beta=beta,
        marks=tuple(marks),
        dvec=tuple(dvec),
        cartan=tuple(cartan_rows),
    )

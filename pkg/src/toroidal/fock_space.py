from __future__ import annotations

from bisect import insort

from .root_data import Atom, Coeff, LatticeContext, pair_atoms
from .wick_engine import LocalField

ZERO = Coeff(0)
ONE = Coeff(1)

# A basis state is a sorted tuple of factors (slot_key, atom, h), where
# h = 2 * mode is a negative odd integer (creation depth) and
# slot_key = (-h, label_rank) orders factors shallowest-first.
#
# Mode conventions: a weight-1/2 field u(z) = sum_{m in Z+1/2} u(m) z^{-m-1/2};
# u(m) with m < 0 creates, m > 0 annihilates, and h = 2m keeps everything
# in exact integer arithmetic.

VACUUM = ()


def slot_key(ctx: LatticeContext, atom: Atom, h: int) -> tuple[int, int]:
    return (-h, ctx.rank_of(atom))


def state_e2(state) -> int:
    """Twice the energy: sum of -h over the factors."""
    return sum(-h for _, _, h in state)


def dump_state(state) -> str:
    if not state:
        return "|0>"
    parts = [f"{atom.dump_name()}({h}/2)" for _, atom, h in state]
    return " ".join(parts) + " |0>"


def apply_atom_mode(ctx: LatticeContext, state, atom: Atom, h: int):
    """Apply the single-field mode atom(h/2); None when it annihilates the state.

    Returns (sign_value, new_state). h must be odd; h < 0 inserts a factor
    (zero on duplicates), h > 0 contracts against the matching factor.
    """
    if h % 2 == 0:
        raise ValueError("modes live in Z + 1/2: h must be odd")
    if h < 0:
        key = slot_key(ctx, atom, h)
        lo = 0
        for i, (k, _, _) in enumerate(state):
            if k == key:
                return None
            if k < key:
                lo = i + 1
        sign = -1 if lo % 2 else 1
        return sign, state[:lo] + ((key, atom, h),) + state[lo:]
    target = atom.partner()
    if target is None:
        return None
    key = slot_key(ctx, target, -h)
    for i, (k, a, _) in enumerate(state):
        if k == key:
            sign = -1 if i % 2 else 1
            return sign * pair_atoms(atom, a), state[:i] + state[i + 1:]
        if k > key:
            break
    return None


def _accumulate(out, state, value):
    if not value:
        return
    acc = out.get(state, ZERO) + value
    if acc:
        out[state] = acc
    elif state in out:
        del out[state]


def as_vector(state_or_vec):
    if isinstance(state_or_vec, dict):
        return state_or_vec
    return {state_or_vec: ONE}


def apply_quad_mode(ctx: LatticeContext, field: LocalField, j: int, state_or_vec):
    """Apply the j-th mode of the quadratic part of `field`.

    For each monomial :u v:, the mode operator is sum_{r+s=j} :u(r)v(s):.
    Candidates split into three disjoint classes:
      (a) both modes create (only when j < 0),
      (b) u annihilates -- its depth must match a factor pairing with u;
          normal ordering moves u to the right, costing a global sign,
      (c) u creates while v annihilates -- already normal ordered.
    Every class touches finitely many factors, so no truncation is involved.
    The identity component of `field` is ignored here; central contributions
    re-enter through the bracket's d_delta coefficient.
    """
    vec = as_vector(state_or_vec)
    out: dict = {}
    jj = 2 * j
    for mono, coeff in field.quad_items():
        u, v = mono.u, mono.v
        pu = u.partner()
        pv = v.partner()
        for state, amp in vec.items():
            base = coeff * amp
            if j < 0:
                for hu in range(jj + 1, 0, 2):
                    hv = jj - hu
                    r1 = apply_atom_mode(ctx, state, v, hv)
                    if r1 is None:
                        continue
                    r2 = apply_atom_mode(ctx, r1[1], u, hu)
                    if r2 is None:
                        continue
                    _accumulate(out, r2[1], base * (r1[0] * r2[0]))
            if pu is not None:
                for _, a, h in state:
                    if a != pu:
                        continue
                    r1 = apply_atom_mode(ctx, state, u, -h)
                    r2 = apply_atom_mode(ctx, r1[1], v, jj + h)
                    if r2 is None:
                        continue
                    _accumulate(out, r2[1], -base * (r1[0] * r2[0]))
            if pv is not None:
                for _, a, h in state:
                    if a != pv or h >= -jj:
                        continue
                    r1 = apply_atom_mode(ctx, state, v, -h)
                    r2 = apply_atom_mode(ctx, r1[1], u, jj + h)
                    if r2 is None:
                        continue
                    _accumulate(out, r2[1], base * (r1[0] * r2[0]))
    return out


def mode_commutator(ctx: LatticeContext, A: LocalField, k: int, B: LocalField,
                    m: int, state_or_vec):
    """[A_k, B_m] applied to a state or vector."""
    vec = as_vector(state_or_vec)
    first = apply_quad_mode(ctx, A, k, apply_quad_mode(ctx, B, m, vec))
    second = apply_quad_mode(ctx, B, m, apply_quad_mode(ctx, A, k, vec))
    for state, val in second.items():
        _accumulate(first, state, -val)
    return first


def vec_sub(lhs: dict, rhs: dict) -> dict:
    out = dict(lhs)
    for state, val in rhs.items():
        _accumulate(out, state, -val)
    return out


def vec_scale(scalar, vec: dict) -> dict:
    c = Coeff._coerce(scalar)
    return {s: c * v for s, v in vec.items() if c * v}


def enumerate_states(ctx: LatticeContext, e2max: int, include_null: bool = True):
    """All basis states with 2*energy <= e2max, sorted by (energy, slots)."""
    if e2max < 0:
        raise ValueError("e2max must be >= 0")
    atoms = [a for a in ctx.atoms
             if include_null or a.partner() is not None]
    slots = []  # (slot_key, atom, h), cheapest first
    h = -1
    while -h <= e2max:
        for a in atoms:
            slots.append((slot_key(ctx, a, h), a, h))
        h -= 2
    out = []

    def rec(start: int, budget: int, prefix):
        out.append(prefix)
        for i in range(start, len(slots)):
            cost = slots[i][0][0]
            if cost > budget:
                break
            rec(i + 1, budget - cost, prefix + (slots[i],))

    rec(0, e2max, VACUUM)
    out.sort(key=lambda s: (state_e2(s), tuple(f[0] for f in s)))
    return out

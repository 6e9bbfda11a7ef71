"""Permutation groups, H/K quotients and spatiotemporal symmetry checks.

Composition follows ``(p * q)(x) = p(q(x))``. Cycle strings such as
``"(1324)"`` map each entry to the next one, so ``(1324)`` sends 1->3,
3->2, 2->4 and 4->1.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .errors import ConfigError, SubgroupError
from .integrator import Trajectory
from .model import CouplingConfig


@dataclass(frozen=True)
class Permutation:
    """Bijection on ``1..n`` stored as the tuple of images."""

    mapping: tuple

    def __post_init__(self):
        m = tuple(int(v) for v in self.mapping)
        if sorted(m) != list(range(1, len(m) + 1)):
            raise ConfigError(f"not a permutation of 1..{len(m)}: {m}")
        object.__setattr__(self, "mapping", m)

    @property
    def n(self) -> int:
        return len(self.mapping)

    def __call__(self, i: int) -> int:
        return self.mapping[i - 1]

    def __mul__(self, other: "Permutation") -> "Permutation":
        return compose(self, other)

    def __pow__(self, k: int) -> "Permutation":
        out = identity(self.n)
        base = self if k >= 0 else self.inverse()
        for _ in range(abs(k)):
            out = compose(base, out)
        return out

    def inverse(self) -> "Permutation":
        inv = [0] * self.n
        for i, v in enumerate(self.mapping, start=1):
            inv[v - 1] = i
        return Permutation(tuple(inv))

    def is_identity(self) -> bool:
        return self.mapping == tuple(range(1, self.n + 1))

    @classmethod
    def from_cycles(cls, text: str, n: int) -> "Permutation":
        """Parse cycle notation, e.g. ``"(13)(24)"``; ``"e"`` or ``"()"`` is the identity."""
        img = list(range(1, n + 1))
        text = text.strip()
        if text in ("", "e", "()"):
            return cls(tuple(img))
        cycles = re.findall(r"\(([^()]*)\)", text)
        if not cycles or re.sub(r"\([^()]*\)", "", text).strip():
            raise ConfigError(f"bad cycle notation {text!r}")
        seen: set = set()
        for c in cycles:
            items = [int(v) for v in re.split(r"[\s,]+", c.strip())] if re.search(r"[\s,]", c.strip()) \
                else [int(ch) for ch in c.strip()]
            for v in items:
                if not 1 <= v <= n or v in seen:
                    raise ConfigError(f"bad element {v} in {text!r}")
                seen.add(v)
            for a, b in zip(items, items[1:] + items[:1]):
                img[a - 1] = b
        return cls(tuple(img))

    def cycles(self) -> list:
        seen, out = set(), []
        for start in range(1, self.n + 1):
            if start in seen or self(start) == start:
                seen.add(start)
                continue
            cyc, k = [], start
            while k not in seen:
                seen.add(k)
                cyc.append(k)
                k = self(k)
            out.append(tuple(cyc))
        return out

    def __str__(self) -> str:
        cyc = self.cycles()
        if not cyc:
            return "e"
        sep = "," if self.n > 9 else ""
        return "".join("(" + sep.join(str(v) for v in c) + ")" for c in cyc)

    def __repr__(self) -> str:
        return f"Permutation({self})"

    def lift(self) -> "Permutation":
        """Extend a 4-neuron permutation to 8 neurons, knee i+4 following hip i."""
        if self.n != 4:
            raise ConfigError("lift expects a permutation of 4 elements")
        return Permutation(self.mapping + tuple(v + 4 for v in self.mapping))


def identity(n: int) -> Permutation:
    return Permutation(tuple(range(1, n + 1)))


def compose(p: Permutation, q: Permutation) -> Permutation:
    """``p * q``: apply ``q`` first, then ``p``."""
    if p.n != q.n:
        raise ConfigError(f"size mismatch {p.n} vs {q.n}")
    return Permutation(tuple(p(q(i)) for i in range(1, p.n + 1)))


def cyc(text: str, n: int = 4) -> Permutation:
    return Permutation.from_cycles(text, n)


# standard generators
OMEGA = cyc("(1324)")
K_REFL = cyc("(13)(24)")
OMEGA8 = cyc("(1324)(5768)", 8)
K8 = cyc("(13)(24)(57)(68)", 8)
LAMBDA8 = cyc("(15)(26)(37)(48)", 8)
KAPPA8 = cyc("(17)(35)(28)(46)", 8)


@dataclass(frozen=True)
class GroupStructure:
    elements: frozenset
    generators: tuple = ()

    @property
    def order(self) -> int:
        return len(self.elements)

    @property
    def n(self) -> int:
        return next(iter(self.elements)).n

    def __contains__(self, p) -> bool:
        return p in self.elements

    def __iter__(self):
        return iter(sorted(self.elements, key=lambda p: p.mapping))

    def __len__(self) -> int:
        return len(self.elements)

    def issubset(self, other: "GroupStructure") -> bool:
        return self.elements <= other.elements

    def is_closed(self) -> bool:
        return all(compose(a, b) in self.elements for a in self.elements for b in self.elements)

    def check_axioms(self) -> bool:
        e = identity(self.n)
        return (
            e in self.elements
            and self.is_closed()
            and all(p.inverse() in self.elements for p in self.elements)
        )

    def is_abelian(self) -> bool:
        return all(compose(a, b) == compose(b, a) for a in self.elements for b in self.elements)

    def lift(self) -> "GroupStructure":
        return GroupStructure(frozenset(p.lift() for p in self.elements),
                              tuple(g.lift() for g in self.generators))


def generate_group(generators: Sequence[Permutation]) -> GroupStructure:
    """Closure of ``generators`` under composition."""
    gens = list(generators)
    if not gens:
        raise ConfigError("need at least one generator")
    n = gens[0].n
    for g in gens:
        if g.n != n:
            raise ConfigError("generators of different sizes")
    e = identity(n)
    elems = {e}
    frontier = [e]
    while frontier:
        nxt = []
        for a in frontier:
            for g in gens:
                b = compose(g, a)
                if b not in elems:
                    elems.add(b)
                    nxt.append(b)
        frontier = nxt
    return GroupStructure(frozenset(elems), tuple(gens))


@dataclass(frozen=True)
class QuotientResult:
    cosets: tuple
    is_cyclic: bool
    is_normal: bool
    generator: Permutation | None

    @property
    def order(self) -> int:
        return len(self.cosets)


def quotient(H: GroupStructure, K: GroupStructure) -> QuotientResult:
    """Left cosets ``aK`` of ``K`` in ``H`` and whether they form a cyclic group.

    Cyclicity is decided by looking for a coset whose powers run through
    every coset; this needs ``K`` normal in ``H``, otherwise the cosets do
    not form a group and ``is_cyclic`` is False.
    """
    if not K.issubset(H):
        raise SubgroupError("K is not contained in H")
    if not K.check_axioms():
        raise SubgroupError("K is not a group")
    cosets = []
    seen: set = set()
    for a in H:
        if a in seen:
            continue
        c = frozenset(compose(a, k) for k in K.elements)
        seen |= c
        cosets.append(c)
    normal = all(
        frozenset(compose(a, k) for k in K.elements) == frozenset(compose(k, a) for k in K.elements)
        for a in H.elements
    )
    gen = None
    if normal:
        e = identity(H.n)
        for c in cosets:
            a = min(c, key=lambda p: p.mapping)
            powers, p = set(), e
            for _ in range(len(cosets)):
                p = compose(a, p)
                powers.add(_coset_of(p, cosets))
            if len(powers) == len(cosets):
                gen = a
                break
    return QuotientResult(tuple(cosets), gen is not None, normal, gen)


def _coset_of(p: Permutation, cosets) -> int:
    for idx, c in enumerate(cosets):
        if p in c:
            return idx
    raise SubgroupError("element outside every coset")


# ------------------------------------------------------- typed automorphisms


def default_edge_types(coupling: CouplingConfig | None = None) -> dict:
    """Label each nonzero coupling entry ``(j, i)`` with its gain name and value."""
    c = coupling or CouplingConfig()
    labels = {}
    for j in range(1, 9):
        for i in range(1, 9):
            if c.lam[j - 1, i - 1]:
                top_j, top_i = j <= 4, i <= 4
                if top_j and top_i:
                    labels[(j, i)] = ("alpha", c.alpha)
                elif not top_j and not top_i:
                    labels[(j, i)] = ("beta", c.beta)
                elif top_j:
                    labels[(j, i)] = ("gamma", c.gamma)
                else:
                    labels[(j, i)] = ("delta", c.delta)
    return labels


def _label_value(label):
    return label[1] if isinstance(label, tuple) else label


def check_typed_automorphism(perm: Permutation, lam=None, edge_types: Mapping | None = None,
                             node_layers: Sequence | None = None) -> bool:
    """True iff ``perm`` maps every edge ``j->i`` onto an edge with an equal-valued label.

    ``edge_types`` maps 1-based ``(j, i)`` to a numeric label or a
    ``(name, value)`` pair; labels compare by value. ``node_layers``, when
    given, must also be preserved.
    """
    lam = CouplingConfig().lam if lam is None else np.asarray(lam)
    edge_types = default_edge_types() if edge_types is None else dict(edge_types)
    n = lam.shape[0]
    if perm.n != n:
        raise ConfigError("permutation size does not match lambda")
    edges = {(j, i) for j in range(1, n + 1) for i in range(1, n + 1) if lam[j - 1, i - 1]}
    if set(edge_types) != edges:
        raise ConfigError("edge labels must cover exactly the nonzero entries of lambda")
    if node_layers is not None:
        if len(node_layers) != n:
            raise ConfigError("node_layers must have one entry per node")
        if any(node_layers[perm(i) - 1] != node_layers[i - 1] for i in range(1, n + 1)):
            return False
    for (j, i) in edges:
        img = (perm(j), perm(i))
        if img not in edges:
            return False
        if _label_value(edge_types[img]) != _label_value(edge_types[(j, i)]):
            return False
    return True


# ----------------------------------------------- spatiotemporal symmetries


@dataclass(frozen=True)
class SpatiotemporalSymmetry:
    """``x_{perm(i)}(t) = x_i(t + phase_shift * T)`` for every neuron ``i``."""

    perm: Permutation
    phase_shift: float

    def __post_init__(self):
        object.__setattr__(self, "phase_shift", float(self.phase_shift) % 1.0)


def verify_gait_symmetry(traj: Trajectory, sym: SpatiotemporalSymmetry, period: float,
                         window: tuple | None = None) -> float:
    """Relative RMS residual of a spatiotemporal symmetry on a trajectory.

    Compares ``x_{perm(i)}(t)`` with ``x_i(t + shift * period)`` (linear
    interpolation) over the window, for all neurons the permutation acts on,
    and divides by the mean peak-to-peak amplitude of those signals.
    """
    n = sym.perm.n
    if window is None:
        window = (traj.t_start, traj.t_end)
    t0, t1 = window
    lag = sym.phase_shift * period
    if t0 < traj.t_start - 1e-9 or t1 + lag > traj.t_end + 1e-9:
        raise ConfigError("window (plus phase shift) exceeds the trajectory")
    m = (traj.times >= t0 - 1e-9) & (traj.times <= t1 + 1e-9)
    ts = traj.times[m]
    sq, amp = [], []
    for i in range(1, n + 1):
        lhs = traj.x(sym.perm(i))[m]
        rhs = np.interp(ts + lag, traj.times, traj.x(i))
        sq.append(np.mean((lhs - rhs) ** 2))
        amp.append(np.ptp(traj.x(i)[m]))
    scale = float(np.mean(amp))
    rms = float(np.sqrt(np.mean(sq)))
    if scale == 0.0:
        return 0.0 if rms == 0.0 else float("inf")
    return rms / scale


# ---------------------------------------------------------------- H/K table


def d4() -> GroupStructure:
    return generate_group([OMEGA, K_REFL])


def _named_subgroups() -> dict:
    w2 = OMEGA ** 2
    kw2 = compose(K_REFL, w2)
    return {
        "1": generate_group([identity(4)]),
        "Z4(w)": generate_group([OMEGA]),
        "D2(k,w^2)": generate_group([K_REFL, w2]),
        "Z2(k)": generate_group([K_REFL]),
        "Z2(kw^2)": generate_group([kw2]),
        "Z2(w^2)": generate_group([w2]),
        "D4": d4(),
    }


_HK_ROWS = {
    "walk": ("Z4(w)", "1", (0.5, 0.25, 0.75)),
    "trot": ("D2(k,w^2)", "Z2(k)", (0.5, 0.0, 0.5)),
    "pace": ("D2(k,w^2)", "Z2(kw^2)", (0.5, 0.5, 0.0)),
    "bound": ("D2(k,w^2)", "Z2(w^2)", (0.0, 0.5, 0.5)),
    "pronk": ("D4", "D4", (0.0, 0.0, 0.0)),
}


@dataclass
class HKEntry:
    gait: str
    H_name: str
    K_name: str
    H: GroupStructure
    K: GroupStructure
    quotient: QuotientResult
    phases: tuple
    K_in_H: bool
    H_in_D4: bool
    symmetries: list = field(default_factory=list)

    @property
    def quotient_order(self) -> int:
        return self.quotient.order

    @property
    def verified(self) -> bool:
        return self.K_in_H and self.H_in_D4 and self.quotient.is_cyclic

    def to_dict(self) -> dict:
        return {
            "gait": self.gait,
            "H": self.H_name,
            "K": self.K_name,
            "H_order": self.H.order,
            "K_order": self.K.order,
            "H/K_order": self.quotient.order,
            "H/K_cyclic": self.quotient.is_cyclic,
            "K_subset_H": self.K_in_H,
            "H_subset_D4": self.H_in_D4,
            "phases_x2_x3_x4": list(self.phases),
            "symmetries": [[str(s.perm), s.phase_shift] for s in self.symmetries],
        }


def phase_shift_of(perm: Permutation, phases: Sequence[float]) -> float | None:
    """Shift ``s`` with ``x_{perm(i)}(t) = x_i(t + s T)`` under a phase table, or None.

    ``phases`` gives the lags of x2, x3, x4 behind x1; ``x_i(t) = x_1(t + phi_i T)``.
    """
    phi = (0.0,) + tuple(phases)
    shifts = {round((phi[perm(i) - 1] - phi[i - 1]) % 1.0, 9) % 1.0 for i in range(1, 5)}
    return shifts.pop() if len(shifts) == 1 else None


def gait_symmetries(gait: str) -> list:
    """Elements of H with their phase shifts (K elements get shift 0)."""
    entry = next(e for e in hk_catalog() if e.gait == gait)
    return entry.symmetries


def hk_catalog() -> list:
    """H, K and H/K for the five gaits, with the expected phase table and checks."""
    groups = _named_subgroups()
    D4 = groups["D4"]
    out = []
    for gait, (hn, kn, phases) in _HK_ROWS.items():
        H, K = groups[hn], groups[kn]
        q = quotient(H, K)
        syms = []
        for h in H:
            s = phase_shift_of(h, phases)
            syms.append(SpatiotemporalSymmetry(h, 0.0 if s is None else s))
        out.append(HKEntry(gait, hn, kn, H, K, q, phases, K.issubset(H), H.issubset(D4), syms))
    return out


def relabel_phases(phases: Sequence[float], perm: Permutation) -> tuple:
    """Phase table after renaming neuron ``i`` to ``perm(i)``, re-referenced to neuron 1."""
    phi = (0.0,) + tuple(phases)
    inv = perm.inverse()
    new = [phi[inv(i) - 1] for i in range(1, 5)]
    return tuple(round((v - new[0]) % 1.0, 9) % 1.0 for v in new[1:])

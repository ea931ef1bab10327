"""Jeffrey conditioning and the generalized CAR condition.

An observation here is a constraint ``alpha_1 U_1; ...; alpha_n U_n`` over
a partition of W, saying the posterior probability of cell U_i is alpha_i.
Runs pair a world with such a constraint.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from carkit.errors import (
    InvalidDistribution,
    InvalidInput,
    MixedPartitions,
    PreconditionViolated,
    SupportMismatch,
    UndefinedJeffrey,
)
from carkit.rational import RationalLike, to_fraction
from carkit.space import ZERO, Event, NaiveDistribution, WorldSpace


@dataclass(frozen=True)
class PartitionConstraint:
    """``alpha_1 U_1; ...; alpha_n U_n`` with the U_i partitioning W.

    Two constraints are equal when their cells and weights agree; the label
    is for display only.
    """

    cells: tuple[Event, ...]
    alphas: tuple[Fraction, ...]
    label: Optional[str] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "cells", tuple(self.cells))
        object.__setattr__(self, "alphas", tuple(to_fraction(a) for a in self.alphas))
        if not self.cells or len(self.cells) != len(self.alphas):
            raise InvalidInput("need one weight per cell and at least one cell")
        if any(a < 0 for a in self.alphas):
            raise InvalidDistribution("negative cell weight")
        if sum(self.alphas, ZERO) != 1:
            raise InvalidDistribution(f"cell weights sum to {sum(self.alphas, ZERO)}, not 1")
        if any(not c.members for c in self.cells):
            raise InvalidInput("cells must be nonempty")
        for a, b in combinations(self.cells, 2):
            if a.members & b.members:
                raise InvalidInput("cells must be disjoint")

    @classmethod
    def of(cls, space: WorldSpace, cells: Sequence[tuple[Iterable[str], RationalLike]],
           label: Optional[str] = None) -> "PartitionConstraint":
        c = cls(tuple(space.event(ms) for ms, _ in cells),
                tuple(to_fraction(a) for _, a in cells), label)
        c.check_covers(space)
        return c

    def check_covers(self, space: WorldSpace) -> None:
        covered = frozenset().union(*(c.members for c in self.cells))
        if covered != frozenset(space.worlds):
            raise InvalidInput(f"cells of {self.name} do not partition the world space")

    @property
    def name(self) -> str:
        if self.label is not None:
            return self.label
        return "; ".join(f"{a} {c.name}" for c, a in zip(self.cells, self.alphas))

    @property
    def partition(self) -> frozenset[frozenset[str]]:
        return frozenset(c.members for c in self.cells)

    def alpha_of(self, members: frozenset[str]) -> Fraction:
        for c, a in zip(self.cells, self.alphas):
            if c.members == members:
                return a
        raise InvalidInput("no such cell")

    def cell_index(self, w: str) -> int:
        for i, c in enumerate(self.cells):
            if w in c:
                return i
        raise InvalidInput(f"{w} lies in no cell")


def jeffrey_update(p: NaiveDistribution, c: PartitionConstraint) -> NaiveDistribution:
    """``sum_i alpha_i p(. | U_i)``; cells with zero weight contribute nothing."""
    c.check_covers(p.space)
    mass: dict[str, Fraction] = {}
    for cell, alpha in zip(c.cells, c.alphas):
        z = p.prob(cell)
        if alpha == 0:
            continue
        if z == 0:
            raise UndefinedJeffrey(f"cell {cell.name} has weight {alpha} but prior probability 0")
        for w in cell.members:
            mass[w] = alpha * p[w] / z
    return NaiveDistribution(p.space, mass)


# -- joints over constraint observations ------------------------------------

ConstraintKey = Union[str, int, PartitionConstraint]


class ProbJointDistribution:
    """Distribution over runs ``(world, constraint)``.

    Accuracy (each constraint's weights are the true conditional cell
    probabilities) is not enforced here; :func:`check_accuracy` tests it.
    """

    __slots__ = ("space", "constraints", "_mass")

    def __init__(self, space: WorldSpace, constraints: Sequence[PartitionConstraint],
                 mass: Mapping[tuple[str, ConstraintKey], RationalLike]):
        self.space = space
        self.constraints = tuple(constraints)
        if not self.constraints:
            raise InvalidInput("need at least one constraint")
        names = [c.name for c in self.constraints]
        if len(set(names)) != len(names) or len(set(self.constraints)) != len(names):
            raise InvalidInput("constraints must be distinct")
        for c in self.constraints:
            c.check_covers(space)
        table: dict[tuple[str, int], Fraction] = {}
        for (w, key), p in mass.items():
            if w not in space:
                raise InvalidDistribution(f"unknown world {w!r}")
            value = to_fraction(p)
            if value < 0:
                raise InvalidDistribution("negative probability")
            k = (w, self.index(key))
            table[k] = table.get(k, ZERO) + value
        total = sum(table.values(), ZERO)
        if total != 1:
            raise InvalidDistribution(f"run masses sum to {total}, not 1")
        self._mass = {k: v for k, v in table.items() if v}

    def index(self, key: ConstraintKey) -> int:
        if isinstance(key, int):
            if not 0 <= key < len(self.constraints):
                raise InvalidInput(f"constraint index {key} out of range")
            return key
        for i, c in enumerate(self.constraints):
            if (isinstance(key, PartitionConstraint) and c == key) or c.name == key:
                return i
        raise InvalidInput(f"unknown constraint {key!r}")

    def mass(self, w: str, key: ConstraintKey) -> Fraction:
        return self._mass.get((w, self.index(key)), ZERO)

    def p_world(self, w: str) -> Fraction:
        return sum((self._mass.get((w, i), ZERO) for i in range(len(self.constraints))), ZERO)

    def p_obs(self, key: ConstraintKey) -> Fraction:
        i = self.index(key)
        return sum((self._mass.get((w, i), ZERO) for w in self.space), ZERO)

    def marginal_world(self) -> NaiveDistribution:
        return NaiveDistribution(self.space, {w: self.p_world(w) for w in self.space})

    def posterior(self, key: ConstraintKey) -> NaiveDistribution:
        """Pr(X_W = . | X_O = C)."""
        z = self.p_obs(key)
        if z == 0:
            raise InvalidInput("constraint is observed with probability 0")
        i = self.index(key)
        return NaiveDistribution(self.space, {w: self._mass.get((w, i), ZERO) / z for w in self.space})

    def items(self):
        for w in self.space:
            for i, c in enumerate(self.constraints):
                p = self._mass.get((w, i))
                if p:
                    yield (w, c.name), p


@dataclass(frozen=True)
class AccuracyWitness:
    constraint: str
    cell: str
    actual: Fraction
    claimed: Fraction


@dataclass(frozen=True)
class AccuracyReport:
    per_constraint: dict[str, bool]
    witnesses: tuple[AccuracyWitness, ...]

    @property
    def overall(self) -> bool:
        return all(self.per_constraint.values())


def check_accuracy(d: ProbJointDistribution) -> AccuracyReport:
    """Does each observed constraint report the true posterior cell weights?"""
    per: dict[str, bool] = {}
    witnesses = []
    for i, c in enumerate(d.constraints):
        z = d.p_obs(i)
        ok = True
        if z > 0:
            for cell, alpha in zip(c.cells, c.alphas):
                actual = sum((d.mass(w, i) for w in cell.members), ZERO) / z
                if actual != alpha:
                    ok = False
                    witnesses.append(AccuracyWitness(c.name, cell.name, actual, alpha))
        per[c.name] = ok
    return AccuracyReport(per, tuple(witnesses))


@dataclass(frozen=True)
class GcarWitness:
    world: str
    other: str
    lhs: Fraction
    rhs: Fraction


@dataclass(frozen=True)
class GcarCheck:
    constraint: str
    cell: int
    cond_a: bool
    cond_b: bool
    witnesses: tuple[GcarWitness, ...]

    @property
    def holds(self) -> bool:
        return self.cond_a and self.cond_b


def check_generalized_car(d: ProbJointDistribution, key: ConstraintKey, i: int) -> GcarCheck:
    """Evaluate both sides of the generalized CAR equivalence for cell ``i``.

    (a) the posterior given C agrees on U_i with Jeffrey conditioning of the
    world marginal; (b) Pr(X_O = C | X_W = w) is constant over the positive
    worlds of U_i.  Both are vacuous when U_i has probability 0.
    """
    ci = d.index(key)
    c = d.constraints[ci]
    cell = c.cells[i]
    members = d.space.ordered(cell.members)
    p_w = {w: d.p_world(w) for w in members}
    p_cell = sum(p_w.values(), ZERO)
    if p_cell == 0:
        return GcarCheck(c.name, i, True, True, ())

    z = d.p_obs(ci)
    cond_a = z == 0 or all(d.mass(w, ci) / z == c.alphas[i] * p_w[w] / p_cell for w in members)

    positive = [w for w in members if p_w[w] > 0]
    witnesses = []
    for w, v in combinations(positive, 2):
        lhs, rhs = d.mass(w, ci) / p_w[w], d.mass(v, ci) / p_w[v]
        if lhs != rhs:
            witnesses.append(GcarWitness(w, v, lhs, rhs))
    return GcarCheck(c.name, i, cond_a, not witnesses, tuple(witnesses))


def generalized_car_holds(d: ProbJointDistribution) -> bool:
    """Conjunction of condition (b) over every constraint and every cell."""
    return all(check_generalized_car(d, k, i).cond_b
               for k, c in enumerate(d.constraints) for i in range(len(c.cells)))


def _shared_partition(constraints: Sequence[PartitionConstraint]) -> tuple[Event, ...]:
    first = constraints[0]
    for c in constraints[1:]:
        if c.partition != first.partition:
            raise MixedPartitions(f"{c.name} uses a different partition from {first.name}")
    return first.cells


def construct_gcar_distribution(space: WorldSpace,
                                constraints: Sequence[PartitionConstraint],
                                p_obs: Sequence[RationalLike],
                                cell_conditionals: Sequence[NaiveDistribution]) -> ProbJointDistribution:
    """Runs generated by: pick C_i, then a cell U_j with weight alpha_ij, then w from Pr_j.

    Mass on ``(w, C_i)`` is ``P_O(C_i) alpha_ij Pr_j(w)`` where U_j contains w.
    ``cell_conditionals`` follow the cell order of the first constraint.
    """
    if not constraints:
        raise InvalidInput("need at least one constraint")
    cells = _shared_partition(constraints)
    for c in constraints:
        c.check_covers(space)
    weights = [to_fraction(x) for x in p_obs]
    if len(weights) != len(constraints):
        raise InvalidInput("one observation probability per constraint is required")
    if any(x <= 0 for x in weights) or sum(weights, ZERO) != 1:
        raise PreconditionViolated("observation probabilities must be positive and sum to 1")
    if any(a <= 0 for c in constraints for a in c.alphas):
        raise PreconditionViolated("every cell weight must be positive")
    if len(cell_conditionals) != len(cells):
        raise InvalidInput("one conditional distribution per cell is required")
    for cell, pr in zip(cells, cell_conditionals):
        if pr.prob(cell) != 1:
            raise SupportMismatch(f"conditional for {cell.name} puts mass outside the cell")

    mass = {}
    for i, c in enumerate(constraints):
        for cell, pr in zip(cells, cell_conditionals):
            a = c.alpha_of(cell.members)
            for w in cell.members:
                if pr[w]:
                    mass[(w, i)] = weights[i] * a * pr[w]
    return ProbJointDistribution(space, constraints, mass)


def sample_gcar(constraints: Sequence[PartitionConstraint], p_obs: Sequence[RationalLike],
                cell_conditionals: Sequence[NaiveDistribution], n: int,
                seed: int) -> dict[tuple[str, str], int]:
    """Ancestral sampling of the same mechanism; counts per (world, constraint)."""
    cells = _shared_partition(constraints)
    rng = np.random.Generator(np.random.PCG64(seed))
    space = cell_conditionals[0].space
    worlds = space.worlds
    po = np.array([float(to_fraction(x)) for x in p_obs])
    alpha = np.array([[float(c.alpha_of(cell.members)) for cell in cells] for c in constraints])
    within = np.array([[float(pr[w]) for w in worlds] for pr in cell_conditionals])

    obs = rng.choice(len(constraints), size=n, p=po / po.sum())
    u = rng.random(n)
    cell = (u[:, None] >= np.cumsum(alpha[obs], axis=1)[:, :-1]).sum(axis=1)
    u = rng.random(n)
    world = (u[:, None] >= np.cumsum(within[cell], axis=1)[:, :-1]).sum(axis=1)

    pairs, freq = np.unique(np.stack([world, obs]), axis=1, return_counts=True)
    return {(worlds[w], constraints[o].name): int(k) for (w, o), k in zip(pairs.T, freq)}


def total_variation(counts: Mapping[tuple[str, str], int], d: ProbJointDistribution) -> float:
    n = sum(counts.values())
    exact = {k: float(v) for k, v in d.items()}
    keys = set(exact) | set(counts)
    return 0.5 * sum(abs(counts.get(k, 0) / n - exact.get(k, 0.0)) for k in keys)

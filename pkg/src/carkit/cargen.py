"""The CARgen and CARgen* generating mechanisms.

CARgen* picks a world from P_W, then repeatedly picks a partition from
P_Pi and reports the cell containing the world, rejecting that report with
probability q_{U|Pi}.  The rejection probabilities are tied together so
every world with positive prior mass loops with the same probability q.
The outcome distribution is computed exactly; the sampler exists for
demonstration and statistical checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Mapping, Optional, Sequence

import numpy as np

from carkit.car import check_car
from carkit.errors import InvalidParams, NotCar
from carkit.rational import feasible_point
from carkit.space import (
    ONE,
    ZERO,
    Event,
    JointDistribution,
    NaiveDistribution,
    ObservationSet,
    marginal_obs,
    marginal_world,
)


@dataclass(frozen=True)
class Partition:
    """A partition of W with a rejection probability for each cell."""

    cells: tuple[Event, ...]
    reject: tuple[Fraction, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "cells", tuple(self.cells))
        object.__setattr__(self, "reject", tuple(Fraction(r) for r in self.reject))
        if len(self.cells) != len(self.reject):
            raise InvalidParams("one rejection probability per cell is required")

    def cell_of(self, w: str) -> int:
        for k, c in enumerate(self.cells):
            if w in c:
                return k
        raise InvalidParams(f"world {w} is in no cell")


@dataclass(frozen=True)
class CarGenParams:
    prior: NaiveDistribution
    partitions: tuple[Partition, ...]
    weights: tuple[Fraction, ...]
    q: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "partitions", tuple(self.partitions))
        object.__setattr__(self, "weights", tuple(Fraction(x) for x in self.weights))
        object.__setattr__(self, "q", Fraction(self.q))

    @classmethod
    def without_rejection(cls, prior: NaiveDistribution,
                          partitions: Sequence[Sequence[Event]],
                          weights: Sequence[Fraction]) -> "CarGenParams":
        """Plain CARgen: nothing is ever rejected and the loop never repeats."""
        parts = tuple(Partition(tuple(p), tuple(ZERO for _ in p)) for p in partitions)
        return cls(prior, parts, tuple(weights), ZERO)

    def cells(self) -> list[Event]:
        """Distinct cells over all partitions, first occurrence wins."""
        seen: dict[frozenset[str], Event] = {}
        for part in self.partitions:
            for c in part.cells:
                seen.setdefault(c.members, c)
        return list(seen.values())

    def loop_probability(self, w: str) -> Fraction:
        """Probability that a report about ``w`` is rejected (left side of the q constraint)."""
        return sum((pw * part.reject[part.cell_of(w)]
                    for part, pw in zip(self.partitions, self.weights)), ZERO)

    def acceptance_weight(self, members: frozenset[str]) -> Fraction:
        """alpha_U: probability that one pass reports U and keeps it."""
        total = ZERO
        for part, pw in zip(self.partitions, self.weights):
            for c, r in zip(part.cells, part.reject):
                if c.members == members:
                    total += pw * (1 - r)
        return total


@dataclass(frozen=True)
class GenerationOutcome:
    world: str
    observation: str
    iterations: int


def validate_params(p: CarGenParams) -> list[str]:
    """All violated requirements, as readable messages.  Empty means valid."""
    problems: list[str] = []
    worlds = set(p.prior.space.worlds)
    if not p.partitions:
        problems.append("no partitions given")
    if len(p.weights) != len(p.partitions):
        problems.append("one weight per partition is required")
    for k, part in enumerate(p.partitions):
        seen: set[str] = set()
        for c in part.cells:
            if not c.members:
                problems.append(f"partition {k} has an empty cell")
            if c.members - worlds:
                problems.append(f"partition {k} mentions unknown worlds {sorted(c.members - worlds)}")
            if seen & c.members:
                problems.append(f"partition {k} has overlapping cells")
            seen |= c.members
        if seen != worlds and not (seen - worlds):
            problems.append(f"partition {k} does not cover {sorted(worlds - seen)}")
        for r in part.reject:
            if not 0 <= r <= 1:
                problems.append(f"partition {k} has rejection probability {r} outside [0,1]")
    if any(x < 0 for x in p.weights):
        problems.append("negative partition weight")
    if sum(p.weights, ZERO) != 1:
        problems.append(f"partition weights sum to {sum(p.weights, ZERO)}, not 1")
    if not 0 <= p.q < 1:
        problems.append(f"loop probability q = {p.q} is not in [0,1)")
    if problems:
        return problems
    for w in p.prior.support():
        qw = p.loop_probability(w)
        if qw != p.q:
            problems.append(f"rejection probability for {w} is {qw}, expected q = {p.q}")
    return problems


def _require_valid(p: CarGenParams) -> None:
    problems = validate_params(p)
    if problems:
        raise InvalidParams("; ".join(problems))


def closed_form_distribution(p: CarGenParams,
                             obs: Optional[ObservationSet] = None) -> JointDistribution:
    """Exact outcome distribution: Pr(w, U) = P_W(w) alpha_U / (1 - q).

    If ``obs`` is omitted, the observation set is every cell that is reported
    with positive probability.
    """
    _require_valid(p)
    alpha = {c.members: p.acceptance_weight(c.members) for c in p.cells()}
    if obs is None:
        obs = ObservationSet(tuple(c for c in p.cells() if alpha[c.members] > 0))
    scale = 1 - p.q
    mass = {}
    for w in p.prior.support():
        for members, a in alpha.items():
            if a and w in members:
                mass[(w, Event(members))] = p.prior[w] * a / scale
    return JointDistribution(p.prior.space, obs, mass)


# -- sampling -----------------------------------------------------------------

@dataclass(frozen=True)
class SimulationResult:
    counts: dict[tuple[str, str], int]
    iterations: np.ndarray
    seed: int

    @property
    def n(self) -> int:
        return int(self.iterations.size)

    @property
    def mean_iterations(self) -> float:
        return float(self.iterations.mean())

    def frequencies(self) -> dict[tuple[str, str], float]:
        return {k: v / self.n for k, v in self.counts.items()}

    def outcomes(self) -> Iterator[tuple[str, str]]:
        for k, v in self.counts.items():
            for _ in range(v):
                yield k


def _tables(p: CarGenParams):
    cells = p.cells()
    index = {c.members: k for k, c in enumerate(cells)}
    worlds = p.prior.space.worlds
    cell = np.zeros((len(worlds), len(p.partitions)), dtype=np.int64)
    reject = np.zeros((len(worlds), len(p.partitions)))
    for j, part in enumerate(p.partitions):
        for i, w in enumerate(worlds):
            k = part.cell_of(w)
            cell[i, j] = index[part.cells[k].members]
            reject[i, j] = float(part.reject[k])
    return cells, cell, reject


def simulate(p: CarGenParams, n: int, seed: int,
             obs: Optional[ObservationSet] = None) -> SimulationResult:
    """Run the mechanism ``n`` times with a PCG64 generator seeded by ``seed``.

    Runs are processed as a batch: every unfinished run picks a partition,
    proposes its cell and keeps it or loops.  Results depend only on the seed.
    """
    _require_valid(p)
    if n <= 0:
        raise InvalidParams("sample count must be positive")
    rng = np.random.Generator(np.random.PCG64(seed))
    cells, cell, reject = _tables(p)
    worlds = p.prior.space.worlds
    prior = np.array([float(p.prior[w]) for w in worlds])
    weights = np.array([float(x) for x in p.weights])

    world = rng.choice(len(worlds), size=n, p=prior / prior.sum())
    chosen = np.full(n, -1, dtype=np.int64)
    iterations = np.zeros(n, dtype=np.int64)
    active = np.arange(n)
    while active.size:
        iterations[active] += 1
        part = rng.choice(len(weights), size=active.size, p=weights / weights.sum())
        keep = rng.random(active.size) >= reject[world[active], part]
        done = active[keep]
        chosen[done] = cell[world[done], part[keep]]
        active = active[~keep]

    names = {c.members: c.name for c in cells}
    if obs is not None:
        names.update({o.members: o.name for o in obs})
    freq = np.bincount(world * len(cells) + chosen, minlength=len(worlds) * len(cells))
    counts = {(worlds[i], names[cells[k].members]): int(freq[i * len(cells) + k])
              for i in range(len(worlds)) for k in range(len(cells)) if freq[i * len(cells) + k]}
    return SimulationResult(counts, iterations, seed)


def generate(p: CarGenParams, rng: np.random.Generator) -> GenerationOutcome:
    """One run of the mechanism, step by step."""
    _require_valid(p)
    worlds = p.prior.space.worlds
    prior = np.array([float(p.prior[w]) for w in worlds])
    weights = np.array([float(x) for x in p.weights])
    w = worlds[rng.choice(len(worlds), p=prior / prior.sum())]
    iterations = 0
    while True:
        iterations += 1
        part = p.partitions[rng.choice(len(weights), p=weights / weights.sum())]
        k = part.cell_of(w)
        if rng.random() >= float(part.reject[k]):
            return GenerationOutcome(w, part.cells[k].name, iterations)


def total_variation(empirical: Mapping[tuple[str, str], float],
                    d: JointDistribution) -> float:
    """Half the L1 distance between sample frequencies and an exact joint."""
    exact = {(w, o): float(v) for (w, o), v in d.items()}
    keys = set(exact) | set(empirical)
    return 0.5 * sum(abs(empirical.get(k, 0.0) - exact.get(k, 0.0)) for k in keys)


# -- synthesis from a CAR distribution --------------------------------------

def synthesize_params(d: JointDistribution) -> CarGenParams:
    """CARgen* parameters whose outcome distribution is exactly ``d``.

    For each observed U_i the partition {U_i, W - U_i} is chosen with
    probability Pr(X_O = U_i); U_i is kept with probability
    eps / Pr(X_W in U_i), where eps is the smallest such probability, and
    the complement is always rejected.
    """
    if not check_car(d).overall:
        raise NotCar("the distribution does not satisfy CAR")
    prior = marginal_world(d)
    p_obs = marginal_obs(d)
    observed = [u for u in d.obs if p_obs[u.name] > 0]
    eps = min(d.p_in(u) for u in observed)
    everything = frozenset(d.space.worlds)
    partitions = []
    for u in observed:
        cells = [u]
        reject = [1 - eps / d.p_in(u)]
        rest = everything - u.members
        if rest:
            cells.append(Event(rest))
            reject.append(ONE)
        partitions.append(Partition(tuple(cells), tuple(reject)))
    return CarGenParams(prior, tuple(partitions),
                        tuple(p_obs[u.name] for u in observed), 1 - eps)


@dataclass(frozen=True)
class PlainFit:
    """Result of searching for rejection-free (plain CARgen) parameters."""

    params: Optional[CarGenParams]
    candidates: tuple[tuple[Event, ...], ...] = field(default=())

    @property
    def found(self) -> bool:
        return self.params is not None


def _exact_covers(target: frozenset[str], sets: list[Event]) -> Iterator[list[Event]]:
    """Families of pairwise disjoint sets from ``sets`` whose union covers ``target``."""
    if not target:
        yield []
        return
    pivot = min(target)
    for k, s in enumerate(sets):
        if pivot in s:
            rest = [t for t in sets[k + 1:] + sets[:k] if not (t.members & s.members)]
            for tail in _exact_covers(target - s.members, rest):
                yield [s] + tail


def fit_without_rejection(d: JointDistribution) -> PlainFit:
    """Exhaustively look for plain CARgen parameters reproducing ``d``.

    With no rejection, every cell containing a world of positive mass is
    reported with positive probability, so it must be an observed set.
    The candidate partitions are therefore the covers of the support by
    disjoint observed sets (leftover null worlds fill one extra cell).  A
    rational LP then looks for partition weights matching ``d``.
    """
    prior = marginal_world(d)
    p_obs = marginal_obs(d)
    observed = [u for u in d.obs if p_obs[u.name] > 0]
    support = frozenset(prior.support())
    covers = []
    seen = set()
    for family in _exact_covers(support, observed):
        key = frozenset(u.members for u in family)
        if key not in seen:
            seen.add(key)
            covers.append(tuple(family))
    if not covers:
        return PlainFit(None, ())

    # each observed U needs total weight gamma_U over the partitions using it
    a_eq = [[ONE] * len(covers)]
    b_eq = [ONE]
    for u in observed:
        w = next(x for x in d.space.ordered(u.members) if prior[x] > 0)
        a_eq.append([ONE if u in fam else ZERO for fam in covers])
        b_eq.append(d.mass(w, u) / prior[w])
    x = feasible_point(a_eq, b_eq)
    if x is None:
        return PlainFit(None, tuple(covers))

    everything = frozenset(d.space.worlds)
    partitions = []
    for fam in covers:
        cells = list(fam)
        rest = everything.difference(*(u.members for u in fam))
        if rest:
            cells.append(Event(rest))
        partitions.append(cells)
    return PlainFit(CarGenParams.without_rejection(prior, partitions, x), tuple(covers))

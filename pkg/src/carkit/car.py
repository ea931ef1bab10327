"""Deciding and certifying coarsening at random (CAR).

Two kinds of question are answered here:

* Given a joint distribution on runs, does CAR hold?  :func:`check_car`
  evaluates the four equivalent formulations independently.
* Given only the worlds and the possible observations, which supports can
  carry a CAR distribution at all?  This goes through the atoms of the
  observation structure and the 0/1 "CARacterizing" matrix S, whose rows
  must satisfy ``S' @ gamma = 1`` for some ``gamma >= 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Optional, Sequence, Union

from carkit.errors import InfeasibleGamma, InvalidInput, SingularMatrix, SupportMismatch
from carkit.rational import (
    DependenceCertificate,
    RationalMatrix,
    Vector,
    affine_dependence,
    feasible_point,
    invert,
    nonneg_affine_combination,
    solve,
    to_fraction,
)
from carkit.space import (
    ONE,
    ZERO,
    Event,
    JointDistribution,
    NaiveDistribution,
    ObservationSet,
    WorldSpace,
)


# -- conditions on a given joint ---------------------------------------------

@dataclass(frozen=True)
class Witness:
    """Two worlds in ``observation`` reported with different probabilities."""

    observation: str
    world: str
    other: str
    lhs: Fraction
    rhs: Fraction


@dataclass(frozen=True)
class ObservationCheck:
    cond_a: bool
    cond_b: bool
    cond_c: bool
    cond_d: bool

    @property
    def holds(self) -> bool:
        return self.cond_a and self.cond_b and self.cond_c and self.cond_d

    @property
    def consistent(self) -> bool:
        return self.cond_a == self.cond_b == self.cond_c == self.cond_d


@dataclass(frozen=True)
class CarCheckReport:
    per_observation: dict[str, ObservationCheck]
    witnesses: tuple[Witness, ...]

    @property
    def overall(self) -> bool:
        return all(c.holds for c in self.per_observation.values())

    def failing(self) -> list[str]:
        return [k for k, c in self.per_observation.items() if not c.holds]


def _check_one(d: JointDistribution, u: Event) -> tuple[ObservationCheck, list[Witness]]:
    members = d.space.ordered(u.members)
    p_obs = d.p_obs(u)
    p_in = d.p_in(u)
    p_w = {w: d.p_world(w) for w in members}
    joint = {w: d.mass(w, u) for w in members}

    # (a) observing U and learning U give the same posterior
    cond_a = p_obs == 0 or all(joint[w] / p_obs == p_w[w] / p_in for w in members)

    # (b) X_W = w independent of X_O = U given X_W in U
    cond_b = p_in == 0 or all(
        joint[w] / p_in == (p_w[w] / p_in) * (p_obs / p_in) for w in members)

    # (c) reporting probability equals its average over U
    cond_c = all(joint[w] / p_w[w] == p_obs / p_in for w in members if p_w[w] > 0)

    # (d) reporting probability is the same for every positive world of U
    positive = [w for w in members if p_w[w] > 0]
    witnesses = []
    for w, v in combinations(positive, 2):
        lhs, rhs = joint[w] / p_w[w], joint[v] / p_w[v]
        if lhs != rhs:
            witnesses.append(Witness(u.name, w, v, lhs, rhs))
    cond_d = not witnesses
    return ObservationCheck(cond_a, cond_b, cond_c, cond_d), witnesses


def check_car(d: JointDistribution) -> CarCheckReport:
    per: dict[str, ObservationCheck] = {}
    witnesses: list[Witness] = []
    for u in d.obs:
        check, wit = _check_one(d, u)
        per[u.name] = check
        witnesses.extend(wit)
    return CarCheckReport(per, tuple(witnesses))


def is_pairwise_disjoint(obs: ObservationSet) -> bool:
    return all(not (a.members & b.members) for a, b in combinations(obs, 2))


def non_car_witness(space: WorldSpace, obs: ObservationSet) -> JointDistribution:
    """A joint violating CAR, for any observation set that is not pairwise disjoint.

    Take U, U' sharing a world w0 and a world w1 in U but not U'.  Half the
    mass goes to (w0, U') and half to (w1, U), so U is reported from w1 but
    never from w0.
    """
    for a, b in combinations(obs, 2):
        shared = a.members & b.members
        if not shared:
            continue
        u, other = (a, b) if a.members - b.members else (b, a)
        w0 = space.ordered(shared)[0]
        w1 = space.ordered(u.members - other.members)[0]
        half = Fraction(1, 2)
        return JointDistribution(space, obs, {(w0, other): half, (w1, u): half})
    raise InvalidInput("the observations are pairwise disjoint, so every joint satisfies CAR")


# -- atoms and the characterizing matrix -------------------------------------

@dataclass(frozen=True)
class Atom:
    signature: frozenset[int]
    members: tuple[str, ...]


@dataclass(frozen=True)
class AtomPartition:
    """Worlds grouped by the set of observations containing them.

    Atoms are listed in order of their first world in the world space.
    Worlds lying in no observation belong to no run and are left out.
    """

    atoms: tuple[Atom, ...]

    def __len__(self) -> int:
        return len(self.atoms)

    def __iter__(self):
        return iter(self.atoms)

    def __getitem__(self, i: int) -> Atom:
        return self.atoms[i]

    def atom_of(self, w: str) -> Optional[int]:
        for i, a in enumerate(self.atoms):
            if w in a.members:
                return i
        return None


def compute_atoms(space: WorldSpace, obs: ObservationSet) -> AtomPartition:
    groups: dict[frozenset[int], list[str]] = {}
    for w in space:
        sig = frozenset(j for j, u in enumerate(obs) if w in u)
        if sig:
            groups.setdefault(sig, []).append(w)
    return AtomPartition(tuple(Atom(sig, tuple(ms)) for sig, ms in groups.items()))


@dataclass(frozen=True)
class CaracterizingMatrix:
    atoms: AtomPartition
    obs: ObservationSet
    matrix: RationalMatrix

    @property
    def shape(self) -> tuple[int, int]:
        return self.matrix.rows, self.matrix.cols

    def rows(self, indices: Optional[Sequence[int]] = None) -> list[Vector]:
        idx = range(self.matrix.rows) if indices is None else indices
        return [self.matrix.row(i) for i in idx]

    def as_lists(self) -> list[list[int]]:
        return [[int(v) for v in r] for r in self.rows()]


def build_matrix(atoms: AtomPartition, obs: ObservationSet) -> CaracterizingMatrix:
    rows = [[int(j in a.signature) for j in range(len(obs))] for a in atoms]
    if not rows:
        raise InvalidInput("no world lies in any observation")
    return CaracterizingMatrix(atoms, obs, RationalMatrix.from_rows(rows))


def caracterizing_matrix(space: WorldSpace, obs: ObservationSet) -> CaracterizingMatrix:
    return build_matrix(compute_atoms(space, obs), obs)


RowsLike = Union[CaracterizingMatrix, RationalMatrix, Sequence[Sequence[object]]]


def _row_vectors(rows: RowsLike, indices: Optional[Sequence[int]] = None) -> list[Vector]:
    if isinstance(rows, CaracterizingMatrix):
        return rows.rows(indices)
    if isinstance(rows, RationalMatrix):
        vecs = rows.to_rows()
    else:
        vecs = [tuple(to_fraction(v) for v in r) for r in rows]
    return vecs if indices is None else [vecs[i] for i in indices]


# -- gamma vectors ------------------------------------------------------------

@dataclass(frozen=True)
class GammaSolution:
    """Reporting probabilities gamma_j = Pr(X_O = U_j | X_W in U_j).

    ``status`` is one of ``Unique``, ``Family``, ``NoSolution``,
    ``NoNonnegativeSolution`` (from :func:`solve_gamma`) or ``Measured``
    (read off a joint by :func:`gamma_from_distribution`).
    """

    status: str
    gamma: Optional[Vector] = None
    basis: tuple[Vector, ...] = ()
    rows: tuple[int, ...] = ()
    system_holds: Optional[bool] = None

    @property
    def feasible(self) -> bool:
        if self.status == "Measured":
            return bool(self.system_holds)
        return self.gamma is not None


def gamma_from_distribution(d: JointDistribution) -> GammaSolution:
    gamma = []
    for u in d.obs:
        p_in = d.p_in(u)
        gamma.append(d.p_obs(u) / p_in if p_in > 0 else ZERO)
    gamma_t = tuple(gamma)
    s = caracterizing_matrix(d.space, d.obs)
    positive = tuple(i for i, a in enumerate(s.atoms)
                     if sum((d.p_world(w) for w in a.members), ZERO) > 0)
    holds = all(sum((v * g for v, g in zip(row, gamma_t)), ZERO) == 1
                for row in s.rows(positive))
    return GammaSolution("Measured", gamma_t, (), positive, holds)


def solve_gamma(rows: RowsLike, indices: Optional[Sequence[int]] = None) -> GammaSolution:
    """Solve ``S' @ gamma = 1`` over gamma >= 0 exactly."""
    vecs = _row_vectors(rows, indices)
    if not vecs:
        raise InvalidInput("need at least one row")
    idx = tuple(indices) if indices is not None else tuple(range(len(vecs)))
    ones = [ONE] * len(vecs)
    result = solve(RationalMatrix.from_rows(vecs), ones)
    if result.kind == "NoSolution":
        return GammaSolution("NoSolution", rows=idx)
    if result.kind == "Unique":
        if all(g >= 0 for g in result.solution):
            return GammaSolution("Unique", result.solution, rows=idx)
        return GammaSolution("NoNonnegativeSolution", rows=idx)
    point = result.solution
    if any(g < 0 for g in point):
        point = feasible_point(vecs, ones)
        if point is None:
            return GammaSolution("NoNonnegativeSolution", rows=idx)
    return GammaSolution("Family", tuple(point), result.basis, idx)


def construct_car_distribution(s: CaracterizingMatrix, rows: Sequence[int],
                               gamma: Sequence[object],
                               prior: NaiveDistribution) -> JointDistribution:
    """Spread ``prior`` over runs so that CAR holds with the given gamma.

    A world in atom A_i reports U_j with probability gamma_j whenever
    A_i lies inside U_j.
    """
    g = tuple(to_fraction(v) for v in gamma)
    if len(g) != s.matrix.cols:
        raise InfeasibleGamma(f"gamma has {len(g)} entries for {s.matrix.cols} observations")
    if any(v < 0 for v in g):
        raise InfeasibleGamma("gamma must be nonnegative")
    for i in rows:
        if sum((a * b for a, b in zip(s.matrix.row(i), g)), ZERO) != 1:
            raise InfeasibleGamma(f"row {i} of S does not satisfy S' gamma = 1")
    chosen = set(rows)
    for i, atom in enumerate(s.atoms):
        mass = sum((prior[w] for w in atom.members), ZERO)
        if (mass > 0) != (i in chosen):
            raise SupportMismatch(f"prior mass on atom {i} does not match the selected rows")
    covered = {w for a in s.atoms for w in a.members}
    if any(prior[w] > 0 for w in prior.space if w not in covered):
        raise SupportMismatch("prior puts mass on a world outside every observation")

    mass_table = {}
    for i in rows:
        atom = s.atoms[i]
        for w in atom.members:
            if prior[w] == 0:
                continue
            for j in atom.signature:
                if g[j]:
                    mass_table[(w, s.obs[j].name)] = prior[w] * g[j]
    return JointDistribution(prior.space, s.obs, mass_table)


def forced_observation_distribution(s: CaracterizingMatrix, rows: Sequence[int],
                                    prior: NaiveDistribution) -> dict[str, Fraction]:
    """Observation marginal forced by n linearly independent atom rows."""
    if len(rows) != s.matrix.cols:
        raise SingularMatrix(f"need {s.matrix.cols} rows, got {len(rows)}")
    inverse = invert(s.matrix.select_rows(rows))
    gamma = inverse.apply([ONE] * len(rows))
    chosen = set(rows)
    for i, atom in enumerate(s.atoms):
        mass = sum((prior[w] for w in atom.members), ZERO)
        if i in chosen and mass == 0:
            raise SupportMismatch(f"atom {i} needs positive prior mass")
        if i not in chosen and mass > 0:
            raise SupportMismatch(f"prior puts mass on atom {i}, which is not selected")
    return {u.name: gamma[j] * prior.prob(u) for j, u in enumerate(s.obs)}


# -- structural blockers --------------------------------------------------------

@dataclass(frozen=True)
class Blocker:
    """A certificate that no CAR distribution can have a certain support.

    For ``AffineNonnegative`` blockers: no CAR distribution gives every atom
    in ``rows`` positive mass while observing ``column`` with positive
    probability.  For ``LinearNotAffine`` blockers the restriction on the
    observation is dropped.
    """

    rows: tuple[int, ...]
    certificate: DependenceCertificate
    atoms: tuple[tuple[str, ...], ...] = field(default=())
    observation: Optional[str] = None

    @property
    def kind(self) -> str:
        return self.certificate.kind

    @property
    def column(self) -> Optional[int]:
        return self.certificate.column


def _subsets(m: int, exhaustive_limit: int, max_size: int):
    if m <= exhaustive_limit:
        for k in range(2, m + 1):
            yield from combinations(range(m), k)
        return
    for k in range(2, min(max_size, m) + 1):
        yield from combinations(range(m), k)
    if m > max_size:
        yield tuple(range(m))


def detect_blockers(s: RowsLike, exhaustive_limit: int = 12,
                    max_size: int = 3) -> list[Blocker]:
    """Search row subsets for dependence certificates.

    All subsets are tried when there are at most ``exhaustive_limit`` atoms;
    otherwise pairs, triples (up to ``max_size``) and the full set.  Only
    minimal blockers are reported: a subset is skipped for a column (or for
    the linear kind) if a smaller subset already blocks it.  An empty result
    means nothing was found among the subsets tried, not that CAR is
    attainable on every support.

    ``s`` may also be a bare 0/1 matrix; atoms are then named A1, A2, ...
    and observations U1, U2, ...
    """
    vecs = _row_vectors(s)
    m, n = len(vecs), len(vecs[0])
    if isinstance(s, CaracterizingMatrix):
        atom_names = [a.members for a in s.atoms]
        obs_names = [u.name for u in s.obs]
    else:
        atom_names = [(f"A{i + 1}",) for i in range(m)]
        obs_names = [f"U{j + 1}" for j in range(n)]
    found: list[Blocker] = []
    blocked_cols: dict[int, list[frozenset[int]]] = {j: [] for j in range(n)}
    blocked_linear: list[frozenset[int]] = []

    for subset in _subsets(m, exhaustive_limit, max_size):
        rows = [vecs[i] for i in subset]
        key = frozenset(subset)
        atoms = tuple(atom_names[i] for i in subset)
        if not any(b <= key for b in blocked_linear):
            cert = affine_dependence(rows)
            if cert:
                blocked_linear.append(key)
                found.append(Blocker(tuple(subset), cert, atoms))
        for j in range(n):
            if any(b <= key for b in blocked_cols[j]):
                continue
            cert = nonneg_affine_combination(rows, j)
            if cert:
                blocked_cols[j].append(key)
                found.append(Blocker(tuple(subset), cert, atoms, obs_names[j]))
    return found

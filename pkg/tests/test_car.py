import itertools
import random
from fractions import Fraction as F

import numpy as np
import pytest

from carkit.car import (
    caracterizing_matrix,
    check_car,
    compute_atoms,
    construct_car_distribution,
    detect_blockers,
    forced_observation_distribution,
    gamma_from_distribution,
    is_pairwise_disjoint,
    non_car_witness,
    solve_gamma,
)
from carkit.errors import InfeasibleGamma, InvalidInput, SingularMatrix, SupportMismatch
from carkit.space import (
    JointDistribution,
    NaiveDistribution,
    WorldSpace,
    condition_naive,
    condition_sophisticated,
    marginal_obs,
    marginal_world,
    observations,
)

from generators import (
    random_car_joint,
    random_disjoint_observations,
    random_joint,
    random_observations,
    random_overlapping_observations,
    random_space,
)

TRIANGLE = [[0, 1, 1], [1, 0, 1], [1, 1, 0]]


def oracle_car(d: JointDistribution) -> bool:
    """CAR as 'naive and sophisticated posteriors agree for every observable U', in floats."""
    po = marginal_obs(d)
    prior = marginal_world(d)
    for u in d.obs:
        if po[u.name] == 0:
            continue
        soph = condition_sophisticated(d, u.name)
        naive = condition_naive(prior, u.members)
        if not np.allclose([float(soph[w]) for w in d.space], [float(naive[w]) for w in d.space],
                           atol=1e-12):
            return False
    return True


def oracle_gamma_feasible(rows):
    linprog = pytest.importorskip("scipy.optimize").linprog
    a = np.array(rows, float)
    res = linprog(np.zeros(a.shape[1]), A_eq=a, b_eq=np.ones(a.shape[0]),
                  bounds=[(0, None)] * a.shape[1], method="highs")
    return res.status == 0


def oracle_max_gamma(rows, j):
    linprog = pytest.importorskip("scipy.optimize").linprog
    a = np.array(rows, float)
    c = np.zeros(a.shape[1])
    c[j] = -1
    res = linprog(c, A_eq=a, b_eq=np.ones(a.shape[0]), bounds=[(0, 1)] * a.shape[1], method="highs")
    return -res.fun if res.status == 0 else None


# -- CAR checks on explicit joints ----------------------------------------------

def three_prisoners(p):
    space = WorldSpace(("w_a", "w_b", "w_c"))
    obs = observations(space, [("{a,b}", ["w_a", "w_b"]), ("{a,c}", ["w_a", "w_c"])])
    third = F(1, 3)
    mass = {("w_a", "{a,b}"): third * p, ("w_a", "{a,c}"): third * (1 - p),
            ("w_b", "{a,b}"): third, ("w_c", "{a,c}"): third}
    return JointDistribution(space, obs, {k: v for k, v in mass.items() if v})


@pytest.mark.parametrize("p", [F(0), F(1, 4), F(1, 2), F(3, 4), F(1)])
def test_three_prisoners_never_car(p):
    report = check_car(three_prisoners(p))
    assert not report.overall
    assert report.failing()
    assert all(c.consistent for c in report.per_observation.values())
    assert not oracle_car(three_prisoners(p))


def test_three_prisoners_witness_values():
    report = check_car(three_prisoners(F(1, 2)))
    got = {(w.observation, w.lhs, w.rhs) for w in report.witnesses}
    assert got == {("{a,b}", F(1, 2), F(1)), ("{a,c}", F(1, 2), F(1))}


def test_mar_setting_is_car():
    space = WorldSpace(("x", "y"))
    obs = observations(space, [("missing", ["x", "y"]), ("x", ["x"]), ("y", ["y"])])
    d = JointDistribution(space, obs, {
        ("x", "missing"): F(1, 6), ("y", "missing"): F(1, 6),
        ("x", "x"): F(1, 3), ("y", "y"): F(1, 3)})
    assert check_car(d).overall


@pytest.mark.parametrize("seed", range(60))
def test_conditions_agree_with_each_other_and_with_oracle(seed):
    rng = random.Random(seed)
    space = random_space(rng)
    obs = random_observations(rng, space, rng.randint(1, 4))
    d = random_joint(rng, space, obs)
    report = check_car(d)
    assert all(c.consistent for c in report.per_observation.values())
    assert report.overall == oracle_car(d)


@pytest.mark.parametrize("seed", range(20))
def test_disjoint_observations_always_car(seed):
    rng = random.Random(seed)
    space = random_space(rng)
    obs = random_disjoint_observations(rng, space)
    assert is_pairwise_disjoint(obs)
    assert check_car(random_joint(rng, space, obs)).overall


@pytest.mark.parametrize("seed", range(20))
def test_overlap_admits_non_car_joint(seed):
    rng = random.Random(seed)
    space = random_space(rng)
    obs = random_overlapping_observations(rng, space)
    d = non_car_witness(space, obs)
    assert not check_car(d).overall
    assert not oracle_car(d)


def test_non_car_witness_rejects_disjoint():
    space = WorldSpace(("a", "b"))
    with pytest.raises(InvalidInput):
        non_car_witness(space, observations(space, [("A", ["a"]), ("B", ["b"])]))


# -- atoms and gamma ---------------------------------------------------------------

def test_atoms_group_by_signature_and_skip_uncovered():
    space = WorldSpace(("w1", "w2", "w3", "w4"))
    obs = observations(space, [("U1", ["w1", "w2"]), ("U2", ["w2", "w3"])])
    atoms = compute_atoms(space, obs)
    assert [a.members for a in atoms] == [("w1",), ("w2",), ("w3",)]
    assert atoms.atom_of("w4") is None
    s = caracterizing_matrix(space, obs)
    assert s.as_lists() == [[1, 0], [1, 1], [0, 1]]


def test_solve_gamma_statuses():
    assert solve_gamma([[1, 0], [1, 1], [0, 1]]).status == "NoSolution"
    sol = solve_gamma(TRIANGLE)
    assert sol.status == "Unique" and sol.gamma == (F(1, 2),) * 3
    fam = solve_gamma([[1, 1]])
    assert fam.status == "Family" and len(fam.basis) == 1 and fam.feasible
    assert solve_gamma([[1, 1], [1, 0], [0, 1]]).status == "NoSolution"


def test_solve_gamma_negative_unique_solution():
    # gamma = (1, 1, -1) is the only solution
    rows = [[1, 0, 0], [0, 1, 0], [1, 1, 1]]
    assert solve_gamma(rows).status == "NoNonnegativeSolution"


@pytest.mark.parametrize("seed", range(40))
def test_solve_gamma_feasibility_matches_lp_oracle(seed):
    rng = random.Random(seed)
    m, n = rng.randint(1, 5), rng.randint(1, 4)
    rows = []
    while len(rows) < m:
        r = [rng.randint(0, 1) for _ in range(n)]
        if any(r) and r not in rows:
            rows.append(r)
        if len(rows) == 2 ** n - 1:
            break
    sol = solve_gamma(rows)
    assert sol.feasible == oracle_gamma_feasible(rows)
    if sol.feasible:
        assert all(g >= 0 for g in sol.gamma)
        assert all(sum(a * g for a, g in zip(r, sol.gamma)) == 1 for r in rows)


@pytest.mark.parametrize("prior", [
    (F(1, 3), F(1, 3), F(1, 3)), (F(1, 2), F(1, 4), F(1, 4)), (F(1, 10), F(3, 10), F(3, 5))])
def test_triangle_construction(prior):
    space = WorldSpace(("a1", "a2", "a3"))
    obs = observations(space, [("U1", ["a2", "a3"]), ("U2", ["a1", "a3"]), ("U3", ["a1", "a2"])])
    s = caracterizing_matrix(space, obs)
    p = NaiveDistribution(space, dict(zip(space, prior)))
    d = construct_car_distribution(s, [0, 1, 2], solve_gamma(s).gamma, p)
    assert check_car(d).overall
    po = marginal_obs(d)
    assert all(v <= F(1, 2) for v in po.values())
    assert po == forced_observation_distribution(s, [0, 1, 2], p)
    assert dict(marginal_world(d)) == dict(p)


def test_construction_validation():
    space = WorldSpace(("a1", "a2", "a3"))
    obs = observations(space, [("U1", ["a2", "a3"]), ("U2", ["a1", "a3"]), ("U3", ["a1", "a2"])])
    s = caracterizing_matrix(space, obs)
    p = NaiveDistribution.uniform(space)
    with pytest.raises(InfeasibleGamma):
        construct_car_distribution(s, [0, 1, 2], [1, 0, 0], p)
    with pytest.raises(SupportMismatch):
        construct_car_distribution(s, [0, 1], [F(1, 2)] * 3, p)
    with pytest.raises(SingularMatrix):
        forced_observation_distribution(s, [0, 1], p)


@pytest.mark.parametrize("seed", range(40))
def test_random_constructions_are_car_and_gamma_round_trips(seed):
    d = random_car_joint(random.Random(seed))
    assert check_car(d).overall
    assert oracle_car(d)
    measured = gamma_from_distribution(d)
    assert measured.feasible
    po = marginal_obs(d)
    for u, g in zip(d.obs, measured.gamma):
        p_in = d.p_in(u)
        assert g == (po[u.name] / p_in if p_in else 0)


def test_forced_observation_distribution_example():
    space = WorldSpace(("a1", "a2", "a3"))
    obs = observations(space, [("U1", ["a2", "a3"]), ("U2", ["a1", "a3"]), ("U3", ["a1", "a2"])])
    s = caracterizing_matrix(space, obs)
    p = NaiveDistribution(space, {"a1": F(1, 2), "a2": F(1, 4), "a3": F(1, 4)})
    assert forced_observation_distribution(s, [0, 1, 2], p) == {"U1": F(1, 4), "U2": F(3, 8), "U3": F(3, 8)}
    identity = observations(space, [(w, [w]) for w in space])
    forced = forced_observation_distribution(caracterizing_matrix(space, identity), [0, 1, 2], p)
    assert forced == dict(p)


# -- blockers ------------------------------------------------------------------------

def test_blockers_on_two_overlapping_observations():
    blockers = detect_blockers([[1, 0], [1, 1], [0, 1]])
    summary = {(b.rows, b.kind, b.observation) for b in blockers}
    assert summary == {((0, 1), "AffineNonnegative", "U2"),
                       ((1, 2), "AffineNonnegative", "U1"),
                       ((0, 1, 2), "LinearNotAffine", None)}
    pair = next(b for b in blockers if b.rows == (0, 1))
    assert pair.certificate.coefficients == (-1, 1)
    assert pair.certificate.combination == (0, 1)
    rows = [[1, 0], [1, 1], [0, 1]]
    for b in blockers:
        assert b.certificate.verify([rows[i] for i in b.rows])


def test_no_blockers_for_triangle():
    assert detect_blockers(TRIANGLE) == []


def _all_small_matrices():
    for n in (2, 3):
        nonzero = [list(r) for r in itertools.product((0, 1), repeat=n) if any(r)]
        for m in range(1, 5):
            yield from (list(c) for c in itertools.combinations(nonzero, m))


def test_blockers_are_sound_and_complete_on_small_matrices():
    """Every support is blocked iff it has no CAR distribution, and blockers are minimal."""
    for rows in _all_small_matrices():
        blockers = detect_blockers(rows)
        m, n = len(rows), len(rows[0])
        for subset in itertools.chain.from_iterable(
                itertools.combinations(range(m), k) for k in range(1, m + 1)):
            sub = [rows[i] for i in subset]
            key = set(subset)
            linear = [b for b in blockers if b.kind == "LinearNotAffine" and set(b.rows) <= key]
            feasible = solve_gamma(sub).feasible
            if solve_gamma(sub).status == "NoSolution":
                assert linear, (rows, subset)
            else:
                assert not linear
            if not feasible:
                continue
            for j in range(n):
                col = [b for b in blockers if b.column == j and set(b.rows) <= key]
                assert bool(col) == (oracle_max_gamma(sub, j) < 1e-9), (rows, subset, j)
        keys = [(frozenset(b.rows), b.kind, b.column) for b in blockers]
        for k1 in keys:
            for k2 in keys:
                if k1 != k2 and k1[1:] == k2[1:]:
                    assert not k1[0] < k2[0]


@pytest.mark.parametrize("seed", range(10))
def test_blockers_admit_no_counterexample_joint(seed):
    """Random joints positive on a blocked support never pass CAR."""
    rng = random.Random(seed)
    space = random_space(rng, 3, 5)
    obs = random_overlapping_observations(rng, space)
    s = caracterizing_matrix(space, obs)
    blockers = detect_blockers(s)
    for _ in range(40):
        d = random_joint(rng, space, obs)
        if not check_car(d).overall:
            continue
        prior = marginal_world(d)
        po = marginal_obs(d)
        for b in blockers:
            positive = all(sum(prior[w] for w in s.atoms[i].members) > 0 for i in b.rows)
            if b.kind == "LinearNotAffine":
                assert not positive
            else:
                assert not (positive and po[b.observation] > 0)


@pytest.mark.parametrize("seed", range(40))
def test_constructed_car_joints_respect_blockers(seed):
    d = random_car_joint(random.Random(1000 + seed))
    s = caracterizing_matrix(d.space, d.obs)
    prior = marginal_world(d)
    po = marginal_obs(d)
    for b in detect_blockers(s):
        positive = all(sum(prior[w] for w in s.atoms[i].members) > 0 for i in b.rows)
        if b.kind == "LinearNotAffine":
            assert not positive
        else:
            assert not (positive and po[b.observation] > 0)

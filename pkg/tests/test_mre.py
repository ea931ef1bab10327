import math
import random
import warnings
from fractions import Fraction as F

import numpy as np
import pytest

from carkit.errors import InfeasibleConstraints, InvalidInput, NonPositivePrior, PreconditionViolated
from carkit.jeffrey import jeffrey_update
from carkit.mre import (
    LinearConstraint,
    RealDistribution,
    SolverOptions,
    WeightedEventConstraint,
    check_two_observation_compatibility,
    conditional_to_linear,
    dual_gradient,
    dual_objective,
    is_jeffrey_like,
    jeffrey_prediction,
    mre_update,
    partition_to_linear,
    relative_entropy,
    strictly_feasible,
    weighted_to_linear,
)
from carkit.space import NaiveDistribution, WorldSpace

from generators import random_constraint, random_partition, random_space, random_weights

W4 = WorldSpace(("1", "2", "3", "4"))
JB = WorldSpace(("BH", "BS", "RH", "RS"))
JB_BLUE = 2 / (2 + 3 ** 0.25 + 3 ** -0.75)


def kl_bits(q, p):
    q, p = np.asarray(q, float), np.asarray(p, float)
    m = q > 0
    return float(np.sum(q[m] * np.log2(q[m] / p[m])))


def random_feasible_problem(rng: random.Random):
    n = rng.randint(3, 5)
    worlds = tuple(f"w{i}" for i in range(n))
    prior = np.array([rng.uniform(0.2, 1.0) for _ in worlds])
    prior /= prior.sum()
    target = np.array([rng.uniform(0.2, 1.0) for _ in worlds])
    target /= target.sum()
    constraints = []
    for _ in range(rng.randint(1, n - 2)):
        coeffs = {w: rng.choice([0, 1, 1, -1, 0.5]) for w in worlds}
        if not any(coeffs.values()):
            coeffs[worlds[0]] = 1
        t = sum(c * target[i] for i, c in enumerate(coeffs.values()))
        constraints.append(LinearConstraint(coeffs, t))
    return worlds, prior, constraints


def slsqp_oracle(prior, constraints, worlds):
    minimize = pytest.importorskip("scipy.optimize").minimize
    f = np.array([c.row(worlds) for c in constraints], float)
    t = np.array([float(c.target) for c in constraints])
    cons = [{"type": "eq", "fun": lambda q: f @ q - t},
            {"type": "eq", "fun": lambda q: q.sum() - 1}]
    res = minimize(lambda q: kl_bits(np.clip(q, 1e-300, None), prior), prior, method="SLSQP",
                   bounds=[(1e-12, 1)] * len(prior), constraints=cons,
                   options={"ftol": 1e-14, "maxiter": 500})
    return res.x


# -- entropy and constraint plumbing -------------------------------------------

def test_relative_entropy_in_bits():
    space = WorldSpace(("a", "b"))
    half = NaiveDistribution.uniform(space)
    point = NaiveDistribution(space, {"a": 1})
    assert relative_entropy(point, half) == pytest.approx(1.0)
    assert relative_entropy(half, point) == math.inf
    assert relative_entropy(half, half) == 0


def test_conditional_constraint_encoding_and_warning():
    c = conditional_to_linear(JB.event(["RH"]), JB.event(["RH", "RS"]), 0.75)
    assert c.row(JB.worlds) == [0, 0, 0.25, -0.75]
    with pytest.warns(UserWarning):
        conditional_to_linear(JB.event(["BH"]), JB.event(["RH", "RS"]), 0.5)
    with pytest.raises(InvalidInput):
        conditional_to_linear(JB.event(["RH"]), JB.event(["RH", "RS"]), 1)
    with pytest.raises(InvalidInput):
        LinearConstraint({"BH": 0}, 1)


def test_prior_must_be_positive():
    prior = NaiveDistribution(W4, {"1": F(1, 2), "2": F(1, 2)})
    with pytest.raises(NonPositivePrior):
        mre_update(prior, [LinearConstraint({"1": 1}, 0.3)])


def test_infeasible_constraints_rejected():
    prior = NaiveDistribution.uniform(W4)
    with pytest.raises(InfeasibleConstraints):
        mre_update(prior, [LinearConstraint({"1": 1}, 0.3), LinearConstraint({"1": 1}, 0.5)])
    # feasible only on the boundary, so no strictly positive solution
    with pytest.raises(InfeasibleConstraints):
        mre_update(prior, [LinearConstraint({"1": 1, "2": 1}, 1)])
    assert not strictly_feasible([[1, 1, 0, 0]], [1])
    assert strictly_feasible([[1, 1, 0, 0]], [F(1, 2)])


def test_redundant_rows_are_dropped():
    prior = NaiveDistribution.uniform(W4)
    a = LinearConstraint({"1": 1, "2": 1}, 0.7)
    b = LinearConstraint({"3": 1, "4": 1}, 0.3)  # implied by a and normalization
    sol = mre_update(prior, [a, b, a])
    assert len(sol.dropped) == 2
    assert sol.posterior.prob(["1", "2"]) == pytest.approx(0.7, abs=1e-12)


def test_no_constraints_returns_prior():
    prior = NaiveDistribution(W4, {"1": F(1, 10), "2": F(2, 10), "3": F(3, 10), "4": F(4, 10)})
    sol = mre_update(prior, [])
    assert sol.posterior.as_dict() == pytest.approx({w: float(prior[w]) for w in W4})


# -- solver correctness -------------------------------------------------------------

@pytest.mark.parametrize("seed", range(25))
def test_solver_matches_slsqp_oracle(seed):
    worlds, prior, constraints = random_feasible_problem(random.Random(seed))
    sol = mre_update(RealDistribution(worlds, prior), constraints)
    assert max(abs(r) for r in sol.residuals) < 1e-9
    ref = slsqp_oracle(prior, constraints, worlds)
    ours = kl_bits(sol.posterior.probs, prior)
    assert ours <= kl_bits(ref, prior) + 1e-6
    assert np.allclose(sol.posterior.probs, ref, atol=1e-4)


@pytest.mark.parametrize("seed", range(25))
def test_posterior_is_exponential_tilt(seed):
    worlds, prior, constraints = random_feasible_problem(random.Random(100 + seed))
    sol = mre_update(RealDistribution(worlds, prior), constraints)
    f = np.array([c.row(worlds) for c in constraints], float)
    log_ratio = np.log(sol.posterior.probs / prior) - f.T @ np.array(sol.beta)
    assert np.ptp(log_ratio) < 1e-9
    assert log_ratio[0] == pytest.approx(-math.log(sol.tilt.z), abs=1e-9)


def test_dual_gradient_matches_finite_differences():
    rng = np.random.default_rng(0)
    for _ in range(20):
        n, k = rng.integers(3, 6), rng.integers(1, 3)
        prior = rng.uniform(0.1, 1, n)
        prior /= prior.sum()
        f = rng.integers(-1, 2, (k, n)).astype(float)
        c = rng.uniform(-0.5, 0.5, k)
        beta = rng.normal(size=k)
        g = dual_gradient(beta, prior, f, c)
        h = 1e-6
        fd = np.array([(dual_objective(beta + h * e, prior, f, c) - dual_objective(beta - h * e, prior, f, c)) / (2 * h)
                       for e in np.eye(k)])
        assert np.allclose(g, fd, rtol=1e-5, atol=1e-7)


@pytest.mark.parametrize("seed", range(40))
def test_partition_constraints_reduce_to_jeffrey(seed):
    rng = random.Random(seed)
    space = random_space(rng)
    prior = NaiveDistribution(space, dict(zip(space, random_weights(rng, len(space), zeros=False))))
    c = random_constraint(rng, space, random_partition(rng, space), positive=True)
    sol = mre_update(prior, partition_to_linear(c))
    expected = jeffrey_update(prior, c)
    assert max(abs(sol.posterior[w] - float(expected[w])) for w in space) < 1e-9


def test_judy_benjamin_against_grid():
    prior = NaiveDistribution.uniform(JB)
    c = conditional_to_linear(JB.event(["RH"]), JB.event(["RH", "RS"]), 0.75)
    sol = mre_update(prior, [c])
    blue = sol.posterior.prob(["BH", "BS"])
    assert blue == pytest.approx(JB_BLUE, abs=1e-9)
    assert blue > 0.5
    best = judy_grid_minimum()
    ours = relative_entropy(sol.posterior, prior)
    assert ours <= best[0] + 1e-9
    assert abs(best[1] - blue) < 1e-5


def judy_grid_minimum():
    """Refining grid over (P(BH), P(red)); red splits 3:1 by the constraint."""
    lo, hi = np.array([0.0, 0.0]), np.array([1.0, 1.0])
    best = (math.inf, None)
    for _ in range(12):
        xs = np.linspace(lo[0], hi[0], 41)
        rs = np.linspace(lo[1], hi[1], 41)
        bh, red = np.meshgrid(xs, rs, indexing="ij")
        bs = 1 - red - bh
        q = np.stack([bh, bs, 0.75 * red, 0.25 * red])
        ok = np.all(q > 0, axis=0)
        with np.errstate(divide="ignore", invalid="ignore"):
            kl = np.where(ok, np.sum(q * np.log2(q / 0.25), axis=0), np.inf)
        i, j = np.unravel_index(np.argmin(kl), kl.shape)
        if kl[i, j] < best[0]:
            best = (float(kl[i, j]), float(bh[i, j] + bs[i, j]))
        span = (hi - lo) / 8
        centre = np.array([xs[i], rs[j]])
        lo, hi = np.clip(centre - span, 0, 1), np.clip(centre + span, 0, 1)
    return best


# -- Jeffrey-like constraints and two observations -----------------------------------

def _u(*ws):
    return W4.event(ws)


def test_jeffrey_like_detection():
    prior = NaiveDistribution.uniform(W4)
    u1, u2 = ["1", "3"], ["2", "3"]
    p = np.full(4, 0.25)
    alpha1 = 0.7
    alpha2 = jeffrey_prediction(p, W4.worlds, _u(*u1), _u(*u2), alpha1)
    res = is_jeffrey_like(prior, WeightedEventConstraint.of(W4, [(u1, alpha1), (u2, alpha2)]))
    assert res.jeffrey_like and res.side == 0 and res.consistent
    assert abs(res.beta[1]) < 1e-7
    generic = is_jeffrey_like(prior, WeightedEventConstraint.of(W4, [(u1, 0.7), (u2, 0.6)]))
    assert not generic.jeffrey_like and generic.consistent


def test_jeffrey_like_preconditions():
    prior = NaiveDistribution.uniform(W4)
    with pytest.raises(PreconditionViolated):
        is_jeffrey_like(prior, WeightedEventConstraint.of(W4, [(["1"], 0.5)]))
    with pytest.raises(PreconditionViolated):
        is_jeffrey_like(prior, WeightedEventConstraint.of(W4, [(["1", "2"], 0.5), (["2", "3", "4"], 0.5)]))


@pytest.mark.parametrize("seed", range(20))
def test_zero_tilt_reproduces_dropped_term(seed):
    """When one tilt component is zero, updating on the other term alone gives its weight."""
    rng = random.Random(seed)
    p = np.array([rng.uniform(0.1, 1) for _ in range(4)])
    p /= p.sum()
    prior = RealDistribution(W4.worlds, p)
    u1, u2 = ["1", "3"], ["2", "3"]
    side = rng.randint(0, 1)
    a = rng.uniform(0.1, 0.9)
    events = (_u(*u1), _u(*u2)) if side == 0 else (_u(*u2), _u(*u1))
    b = jeffrey_prediction(p, W4.worlds, events[0], events[1], a)
    terms = [(u1, a), (u2, b)] if side == 0 else [(u1, b), (u2, a)]
    c = WeightedEventConstraint.of(W4, terms)
    sol = mre_update(prior, weighted_to_linear(c))
    zero = [i for i, beta in enumerate(sol.beta) if abs(beta) < 1e-7]
    assert zero == [1 - side]
    kept = LinearConstraint({w: 1 for w in c.terms[side][0].members}, c.terms[side][1])
    single = mre_update(prior, [kept])
    dropped_event, dropped_alpha = c.terms[1 - side]
    assert single.posterior.prob(dropped_event) == pytest.approx(dropped_alpha, abs=1e-9)


def test_compatibility_worked_example():
    prior = NaiveDistribution.uniform(W4)
    c1 = WeightedEventConstraint.of(W4, [(["1", "3"], 0.7), (["2", "3"], 0.5)])
    c2 = WeightedEventConstraint.of(W4, [(["1", "3"], 0.3), (["2", "3"], 0.5)])
    res = check_two_observation_compatibility(prior, c1, c2)
    assert res.feasible
    assert res.lam == pytest.approx(0.5, abs=1e-9)
    assert res.mixture_residual < 1e-8


def test_compatibility_degenerate_and_generic():
    prior = NaiveDistribution.uniform(W4)
    own = WeightedEventConstraint.of(W4, [(["1", "3"], 0.5), (["2", "3"], 0.5)])
    res = check_two_observation_compatibility(prior, own, own)
    assert res.feasible and res.lam == 0.5
    generic = WeightedEventConstraint.of(W4, [(["1", "3"], 0.7), (["2", "3"], 0.6)])
    res = check_two_observation_compatibility(prior, generic, own)
    assert not res.feasible and res.lam is None
    with pytest.raises(PreconditionViolated):
        other = WeightedEventConstraint.of(W4, [(["1", "2"], 0.5), (["2", "3"], 0.5)])
        check_two_observation_compatibility(prior, generic, other)


def test_solver_options_are_respected():
    prior = NaiveDistribution.uniform(JB)
    c = conditional_to_linear(JB.event(["RH"]), JB.event(["RH", "RS"]), 0.75)
    with pytest.raises(InfeasibleConstraints):
        mre_update(prior, [c], SolverOptions(max_iter=1))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert mre_update(prior, [c], SolverOptions(check_feasibility=False)).iterations > 0

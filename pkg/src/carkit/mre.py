"""Minimum relative entropy (MRE) updating under linear constraints.

For constraints ``E[f_j] = c_j`` the MRE posterior is an exponential tilt
of the prior, ``p(w) exp(sum_j beta_j f_j(w)) / Z``.  The tilt is found by
minimizing the convex dual ``log Z(beta) - beta . c`` with damped Newton
steps.  This module is the only place (besides Monte Carlo) that works in
floating point.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence, Union

import numpy as np

from carkit.errors import (
    InfeasibleConstraints,
    InvalidInput,
    NonPositivePrior,
    PreconditionViolated,
)
from carkit.jeffrey import PartitionConstraint
from carkit.rational import feasible_point, rref, to_fraction
from carkit.space import Event, NaiveDistribution, WorldSpace

Number = Union[float, int, Fraction]


# -- distributions and entropy ------------------------------------------------

@dataclass(frozen=True)
class RealDistribution:
    """Floating-point distribution over an ordered list of worlds."""

    worlds: tuple[str, ...]
    probs: np.ndarray = field(repr=False)

    def __getitem__(self, w: str) -> float:
        return float(self.probs[self.worlds.index(w)])

    def prob(self, event: Union[Event, Iterable[str]]) -> float:
        members = event.members if isinstance(event, Event) else set(event)
        return float(sum(p for w, p in zip(self.worlds, self.probs) if w in members))

    def as_dict(self) -> dict[str, float]:
        return {w: float(p) for w, p in zip(self.worlds, self.probs)}


PriorLike = Union[NaiveDistribution, RealDistribution, Mapping[str, Number]]


def _as_arrays(prior: PriorLike) -> tuple[tuple[str, ...], np.ndarray]:
    if isinstance(prior, RealDistribution):
        return prior.worlds, np.asarray(prior.probs, dtype=float)
    worlds = tuple(prior.space.worlds) if isinstance(prior, NaiveDistribution) else tuple(prior)
    return worlds, np.array([float(prior[w]) for w in worlds])


def relative_entropy(q: PriorLike, p: PriorLike) -> float:
    """KL divergence of ``q`` from ``p`` in bits; infinite without absolute continuity."""
    wq, aq = _as_arrays(q)
    wp, ap = _as_arrays(p)
    if set(wq) != set(wp):
        raise InvalidInput("distributions live on different world sets")
    ap = np.array([ap[wp.index(w)] for w in wq])
    mask = aq > 0
    if np.any(ap[mask] <= 0):
        return math.inf
    return float(np.sum(aq[mask] * np.log2(aq[mask] / ap[mask])))


# -- constraints ---------------------------------------------------------------

@dataclass(frozen=True)
class LinearConstraint:
    """``sum_w coefficients[w] * P(w) = target``."""

    coefficients: Mapping[str, Number]
    target: Number = 0

    def __post_init__(self) -> None:
        if not any(v != 0 for v in self.coefficients.values()):
            raise InvalidInput("a linear constraint needs a nonzero coefficient")

    def row(self, worlds: Sequence[str]) -> list[Number]:
        unknown = set(self.coefficients) - set(worlds)
        if unknown:
            raise InvalidInput(f"constraint mentions unknown worlds {sorted(unknown)}")
        return [self.coefficients.get(w, 0) for w in worlds]


@dataclass(frozen=True)
class WeightedEventConstraint:
    """``alpha_1 U_1; ...; alpha_n U_n`` where the U_i may overlap."""

    terms: tuple[tuple[Event, Number], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "terms", tuple((e, a) for e, a in self.terms))
        if not self.terms:
            raise InvalidInput("need at least one term")
        for e, a in self.terms:
            if not e.members:
                raise InvalidInput("events must be nonempty")
            if not 0 <= a <= 1:
                raise InvalidInput(f"weight {a} is not a probability")

    @classmethod
    def of(cls, space: WorldSpace, terms: Sequence[tuple[Iterable[str], Number]]) -> "WeightedEventConstraint":
        return cls(tuple((space.event(ms), a) for ms, a in terms))

    @property
    def events(self) -> list[Event]:
        return [e for e, _ in self.terms]

    @property
    def alphas(self) -> list[Number]:
        return [a for _, a in self.terms]


def weighted_to_linear(c: WeightedEventConstraint) -> list[LinearConstraint]:
    """Each term alpha U becomes E[1_U] = alpha."""
    return [LinearConstraint({w: 1 for w in e.members}, a) for e, a in c.terms]


def partition_to_linear(c: PartitionConstraint) -> list[LinearConstraint]:
    return [LinearConstraint({w: 1 for w in e.members}, a) for e, a in zip(c.cells, c.alphas)]


def conditional_to_linear(u: Event, v: Event, alpha: Number) -> LinearConstraint:
    """P(U | V) = alpha, written as E[1_{U&V} - alpha 1_V] = 0."""
    if not 0 < alpha < 1:
        raise InvalidInput("conditional probability must be strictly between 0 and 1")
    if not u.members <= v.members:
        warnings.warn("conditioning event does not contain the target event", stacklevel=2)
    coeffs = {w: (1 - alpha) if w in u.members else -alpha for w in v.members}
    return LinearConstraint(coeffs, 0)


# -- solver ----------------------------------------------------------------------

@dataclass(frozen=True)
class TiltVector:
    beta: tuple[float, ...]
    z: float


@dataclass(frozen=True)
class MreSolution:
    posterior: RealDistribution
    tilt: TiltVector
    residuals: tuple[float, ...]
    iterations: int
    dropped: tuple[int, ...] = ()

    @property
    def beta(self) -> tuple[float, ...]:
        return self.tilt.beta


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-10
    max_iter: int = 500
    cond_limit: float = 1e12
    redundancy_tol: float = 1e-9
    check_feasibility: bool = True


def _log_partition(beta: np.ndarray, log_prior: np.ndarray, f: np.ndarray) -> tuple[float, np.ndarray]:
    s = log_prior + beta @ f
    top = s.max()
    e = np.exp(s - top)
    total = e.sum()
    return top + math.log(total), e / total


def dual_objective(beta: Sequence[float], prior: np.ndarray, f: np.ndarray, c: np.ndarray) -> float:
    """``log sum_w p(w) exp(beta . f(w)) - beta . c``."""
    beta = np.asarray(beta, dtype=float)
    log_z, _ = _log_partition(beta, np.log(prior), f)
    return log_z - float(beta @ c)


def dual_gradient(beta: Sequence[float], prior: np.ndarray, f: np.ndarray, c: np.ndarray) -> np.ndarray:
    """Expected constraint values under the tilt, minus the targets."""
    beta = np.asarray(beta, dtype=float)
    _, q = _log_partition(beta, np.log(prior), f)
    return f @ q - c


def _independent_rows(rows: list[list[Fraction]], targets: list[Fraction],
                      tol: float) -> tuple[list[int], list[int]]:
    """Split constraints into a maximal independent set (alongside the total-mass row) and the rest.

    Redundant rows must have targets consistent with the kept ones.
    """
    n = len(rows[0])
    kept: list[int] = []
    dropped: list[int] = []
    basis = [[Fraction(1)] * n + [Fraction(1)]]
    for j, (r, t) in enumerate(zip(rows, targets)):
        _, piv = rref([row[:n] for row in basis] + [list(r)])
        if len(piv) == len(basis):
            # row is a combination of the kept rows; compare targets numerically
            residual = _target_gap(basis, r, t, n)
            if residual > tol:
                raise InfeasibleConstraints(f"constraint {j} contradicts the others (gap {residual:.3g})")
            dropped.append(j)
        else:
            basis.append(list(r) + [t])
            kept.append(j)
    return kept, dropped


def _target_gap(basis: list[list[Fraction]], r: Sequence[Fraction], t: Fraction, n: int) -> float:
    # express r in terms of the basis rows, then compare the implied target with t
    cols = [[b[k] for b in basis] for k in range(n)]
    aug = [cols[k] + [r[k]] for k in range(n)]
    reduced, piv = rref(aug)
    coeffs = [Fraction(0)] * len(basis)
    for i, pc in enumerate(piv):
        if pc < len(basis):
            coeffs[pc] = reduced[i][len(basis)]
    implied = sum((a * b[n] for a, b in zip(coeffs, basis)), Fraction(0))
    return abs(float(implied - t))


def strictly_feasible(rows: Sequence[Sequence[Number]], targets: Sequence[Number]) -> bool:
    """Exact LP: is there a strictly positive distribution meeting every constraint?

    Scale so the smallest mass is at least 1: with x = 1 + y, y >= 0 and
    total mass s >= 0, solve F x = c s and sum(x) = s.
    """
    if not rows:
        return True
    fr = [[to_fraction(v) for v in r] for r in rows]
    ct = [to_fraction(v) for v in targets]
    n = len(fr[0])
    a_eq, b_eq = [], []
    for r, t in zip(fr, ct):
        a_eq.append(r + [-t])
        b_eq.append(-sum(r, Fraction(0)))
    a_eq.append([Fraction(1)] * n + [Fraction(-1)])
    b_eq.append(Fraction(-n))
    return feasible_point(a_eq, b_eq) is not None


def mre_update(prior: PriorLike, constraints: Sequence[LinearConstraint],
               options: SolverOptions = SolverOptions()) -> MreSolution:
    """The distribution closest to ``prior`` in relative entropy that meets ``constraints``."""
    worlds, p = _as_arrays(prior)
    if np.any(p <= 0):
        raise NonPositivePrior("the prior must give every world positive mass")
    p = p / p.sum()
    if not constraints:
        return MreSolution(RealDistribution(worlds, p), TiltVector((), 1.0), (), 0)

    raw = [c.row(worlds) for c in constraints]
    targets = [c.target for c in constraints]
    rows = [[to_fraction(v) for v in r] for r in raw]
    kept, dropped = _independent_rows(rows, [to_fraction(t) for t in targets], options.redundancy_tol)
    if options.check_feasibility and not strictly_feasible([raw[j] for j in kept],
                                                           [targets[j] for j in kept]):
        raise InfeasibleConstraints("no strictly positive distribution satisfies the constraints")

    f_all = np.array(raw, dtype=float)
    c_all = np.array(targets, dtype=float)
    f, c = f_all[kept], c_all[kept]
    beta, iterations = _newton(p, f, c, options)

    full_beta = np.zeros(len(constraints))
    full_beta[kept] = beta
    log_z, q = _log_partition(beta, np.log(p), f)
    residuals = f_all @ q - c_all
    if np.max(np.abs(residuals)) > options.tol * 10:
        raise InfeasibleConstraints(f"solver stalled with residual {np.max(np.abs(residuals)):.3g}")
    return MreSolution(RealDistribution(worlds, q), TiltVector(tuple(float(b) for b in full_beta), math.exp(log_z)),
                       tuple(float(r) for r in residuals), iterations, tuple(dropped))


def _newton(p: np.ndarray, f: np.ndarray, c: np.ndarray, opt: SolverOptions) -> tuple[np.ndarray, int]:
    if f.shape[0] == 0:
        return np.zeros(0), 0
    log_p = np.log(p)
    beta = np.zeros(f.shape[0])
    value, q = _log_partition(beta, log_p, f)
    value -= beta @ c
    for it in range(1, opt.max_iter + 1):
        mean = f @ q
        grad = mean - c
        if np.max(np.abs(grad)) <= opt.tol:
            return beta, it - 1
        hess = (f * q) @ f.T - np.outer(mean, mean)
        if np.linalg.cond(hess) > opt.cond_limit:
            # near-singular curvature: one-dimensional Newton steps per coordinate
            diag = np.maximum(np.diag(hess), 1e-300)
            step = np.zeros_like(beta)
            k = int(np.argmax(np.abs(grad)))
            step[k] = -grad[k] / diag[k]
        else:
            step = -np.linalg.solve(hess, grad)
        slope = float(grad @ step)
        g_norm = float(np.linalg.norm(grad))
        t = 1.0
        while True:
            trial = beta + t * step
            log_z, q_trial = _log_partition(trial, log_p, f)
            new_value = log_z - trial @ c
            # near the optimum the objective decrease drowns in rounding, so a
            # shrinking gradient also counts as progress
            if (new_value <= value + 1e-4 * t * slope
                    or np.linalg.norm(f @ q_trial - c) <= (1 - 1e-4 * t) * g_norm
                    or t < 1e-12):
                break
            t *= 0.5
        if not np.all(np.isfinite(trial)) or np.max(np.abs(trial)) > 1e8:
            raise InfeasibleConstraints("tilt diverges; constraints are infeasible or on the boundary")
        beta, q, value = trial, q_trial, new_value
    raise InfeasibleConstraints("solver did not converge")


# -- two-term constraints ------------------------------------------------------

def _regions(worlds: Sequence[str], u1: Event, u2: Event) -> list[list[int]]:
    """Indices of U1-U2, U2-U1, U1&U2 and W-(U1|U2), in that order."""
    out: list[list[int]] = [[], [], [], []]
    for i, w in enumerate(worlds):
        a, b = w in u1, w in u2
        out[0 if a and not b else 1 if b and not a else 2 if a and b else 3].append(i)
    return out


def _check_two_term(prior: PriorLike, c: WeightedEventConstraint) -> tuple[tuple[str, ...], np.ndarray]:
    worlds, p = _as_arrays(prior)
    if len(c.terms) != 2:
        raise PreconditionViolated("the constraint must have exactly two terms")
    if np.any(p <= 0):
        raise PreconditionViolated("the prior must be strictly positive")
    (u1, _), (u2, _) = c.terms
    if any(not r for r in _regions(worlds, u1, u2)):
        raise PreconditionViolated("U1-U2, U2-U1, U1&U2 and the rest must all be nonempty")
    if not all(0 < a < 1 for a in c.alphas):
        raise PreconditionViolated("weights must lie strictly between 0 and 1")
    return worlds, p / p.sum()


def jeffrey_prediction(p: np.ndarray, worlds: Sequence[str], u: Event, v: Event, alpha: float) -> float:
    """P(V) after Jeffrey conditioning on alpha U; (1 - alpha)(W - U)."""
    in_u = np.array([w in u for w in worlds])
    in_v = np.array([w in v for w in worlds])
    pu = p[in_u].sum()
    return float(alpha * p[in_u & in_v].sum() / pu + (1 - alpha) * p[~in_u & in_v].sum() / (1 - pu))


@dataclass(frozen=True)
class JeffreyLikeResult:
    jeffrey_like: bool
    side: Optional[int]
    predicted: tuple[float, float]
    beta: tuple[float, ...] = ()
    consistent: Optional[bool] = None


def is_jeffrey_like(prior: PriorLike, c: WeightedEventConstraint, tol: float = 1e-9,
                    beta_tol: float = 1e-7, cross_check: bool = True) -> JeffreyLikeResult:
    """Does updating on one term alone already deliver the other term?

    ``side`` is 0 when alpha_1 U_1 suffices and 1 when alpha_2 U_2 does.
    The cross-check solves the full problem and compares with the zero
    pattern of the tilt.
    """
    worlds, p = _check_two_term(prior, c)
    (u1, a1), (u2, a2) = c.terms
    a1, a2 = float(a1), float(a2)
    pred = (jeffrey_prediction(p, worlds, u1, u2, a1), jeffrey_prediction(p, worlds, u2, u1, a2))
    side = 0 if abs(pred[0] - a2) <= tol else 1 if abs(pred[1] - a1) <= tol else None
    if not cross_check:
        return JeffreyLikeResult(side is not None, side, pred)
    sol = mre_update(RealDistribution(worlds, p), weighted_to_linear(c),
                     SolverOptions(check_feasibility=False))
    zero = min(abs(b) for b in sol.beta) < beta_tol
    return JeffreyLikeResult(side is not None, side, pred, sol.beta, bool(zero == (side is not None)))


@dataclass(frozen=True)
class CompatibilityResult:
    """Can one joint make MRE agree with conditioning for both observations?

    ``residuals`` are the three equations in mu evaluated at the chosen mu;
    when infeasible they certify which equation fails.
    """

    feasible: bool
    lam: Optional[float]
    mu: Optional[float]
    beta: tuple[tuple[float, float], tuple[float, float]]
    z: tuple[float, float]
    eps: tuple[tuple[float, float], tuple[float, float]]
    residuals: tuple[float, float, float]
    mixture_residual: Optional[float]
    reason: str


def check_two_observation_compatibility(prior: PriorLike, c1: WeightedEventConstraint,
                                        c2: WeightedEventConstraint, eq_tol: float = 1e-9,
                                        mixture_tol: float = 1e-8) -> CompatibilityResult:
    """Look for lambda with lambda P(.|C1) + (1-lambda) P(.|C2) = prior.

    With mu = lambda / Z_1 and eps_ij = exp(beta_ij) - 1 the mixture
    identity reduces to three linear equations in mu, one per region
    U1-U2, U2-U1 and U1&U2; the fourth region fixes lambda = mu Z_1.
    """
    worlds, p = _check_two_term(prior, c1)
    _check_two_term(prior, c2)
    if [e.members for e in c1.events] != [e.members for e in c2.events]:
        raise PreconditionViolated("both observations must weigh the same two events")
    opts = SolverOptions(check_feasibility=False)
    s1 = mre_update(RealDistribution(worlds, p), weighted_to_linear(c1), opts)
    s2 = mre_update(RealDistribution(worlds, p), weighted_to_linear(c2), opts)
    b1 = (float(s1.beta[0]), float(s1.beta[1]))
    b2 = (float(s2.beta[0]), float(s2.beta[1]))
    e1 = tuple(math.expm1(b) for b in b1)
    e2 = tuple(math.expm1(b) for b in b2)
    a = np.array([e1[0], e1[1], e1[0] + e1[1] + e1[0] * e1[1]])
    b = np.array([e2[0], e2[1], e2[0] + e2[1] + e2[0] * e2[1]])
    z = (s1.tilt.z, s2.tilt.z)
    common = dict(beta=(b1, b2), z=z, eps=(e1, e2))

    def mixture(lam: float) -> float:
        mix = lam * s1.posterior.probs + (1 - lam) * s2.posterior.probs
        return float(np.max(np.abs(mix - p)))

    if np.max(np.abs(np.concatenate([a, b]))) <= eq_tol:
        res = mixture(0.5)
        return CompatibilityResult(res <= mixture_tol, 0.5, 0.5 / z[0], residuals=(0.0, 0.0, 0.0),
                                   mixture_residual=res, reason="both posteriors equal the prior", **common)

    k = int(np.argmax(np.abs(a - b)))
    if abs(a[k] - b[k]) <= eq_tol:
        # a == b != 0: mu drops out and every equation reads b_k = 0
        residuals = tuple(float(x) for x in b)
        return CompatibilityResult(False, None, None, residuals=residuals, mixture_residual=None,
                                   reason="the equations have no solution in mu", **common)
    mu = float(b[k] / (b[k] - a[k]))
    residuals = tuple(float(x) for x in a * mu + b * (1 - mu))
    if max(abs(r) for r in residuals) > eq_tol:
        return CompatibilityResult(False, None, mu, residuals=residuals, mixture_residual=None,
                                   reason="no mu satisfies all three equations", **common)
    if not 0 < mu < 1:
        return CompatibilityResult(False, None, mu, residuals=residuals, mixture_residual=None,
                                   reason=f"mu = {mu:.6g} lies outside (0,1)", **common)
    lam = mu * z[0]
    if not 0 < lam < 1:
        return CompatibilityResult(False, lam, mu, residuals=residuals, mixture_residual=None,
                                   reason=f"lambda = {lam:.6g} lies outside (0,1)", **common)
    res = mixture(lam)
    ok = res <= mixture_tol
    return CompatibilityResult(ok, lam, mu, residuals=residuals, mixture_residual=res,
                               reason="mixture identity holds" if ok else "mixture identity fails",
                               **common)

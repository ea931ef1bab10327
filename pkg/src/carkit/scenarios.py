"""Built-in puzzle scenarios and the report runner behind the CLI.

A scenario is a JSON document.  Event-observation scenarios carry worlds,
observations and usually a joint over runs; constraint scenarios carry a
prior and one or more constraints.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Callable, Mapping, Optional

from carkit import car, cargen, jeffrey, mre
from carkit import serialize as io
from carkit.errors import InapplicableAnalysis, InvalidInput, SingularMatrix, UnknownScenario
from carkit.space import (
    JointDistribution,
    NaiveDistribution,
    ObservationSet,
    WorldSpace,
    condition_naive,
    condition_sophisticated,
    marginal_obs,
    marginal_world,
)

KINDS = ("event-observation", "partition-constraint", "weighted-constraint")
ANALYSES = ("car-check", "feasibility", "cargen-roundtrip", "jeffrey", "gcar", "mre", "compare-updates")


@dataclass(frozen=True)
class Scenario:
    name: str
    kind: str
    payload: dict

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise InvalidInput(f"unknown scenario kind {self.kind!r}")
        # store the canonical JSON form so equality means equal files
        object.__setattr__(self, "payload", io.loads(io.dumps(self.payload)))
        self.space()
        if "observations" in self.payload:
            self.observations()
        if "joint" in self.payload:
            self.joint()
        if "prior" in self.payload:
            self.prior()
        if "constraints" in self.payload:
            for doc in self.payload["constraints"]:
                io.parse_linear_constraints(self.space(), doc)

    def space(self) -> WorldSpace:
        return io.parse_space(self.payload)

    def observations(self) -> ObservationSet:
        if "observations" not in self.payload:
            raise InapplicableAnalysis(f"{self.name} has no event observations")
        return io.parse_observations(self.space(), self.payload["observations"])

    def joint(self) -> JointDistribution:
        if "joint" not in self.payload:
            raise InapplicableAnalysis(f"{self.name} has no joint distribution over runs")
        return io.parse_joint(self.space(), self.observations(), self.payload["joint"])

    def prior(self) -> NaiveDistribution:
        if "prior" in self.payload:
            return io.parse_prior(self.space(), self.payload["prior"])
        if "joint" in self.payload:
            return marginal_world(self.joint())
        raise InapplicableAnalysis(f"{self.name} has no prior")

    def constraint_docs(self) -> list[Any]:
        return list(self.payload.get("constraints", []))

    def to_json(self) -> str:
        return io.dumps({"name": self.name, "kind": self.kind, **self.payload})

    @classmethod
    def from_json(cls, text: str) -> "Scenario":
        doc = io.loads(text)
        if not isinstance(doc, dict):
            raise InvalidInput("a scenario must be a JSON object")
        doc = dict(doc)
        name = doc.pop("name", "scenario")
        kind = doc.pop("kind", None)
        if kind is None:
            kind = "event-observation" if "observations" in doc else "weighted-constraint"
        return cls(name, kind, doc)


# -- built-in corpus ------------------------------------------------------------

def _prisoners(p: Fraction) -> Scenario:
    """Jailer's answer to prisoner a.  In w_a (a pardoned) he says "b" with probability p."""
    third = Fraction(1, 3)
    joint = [
        {"world": "w_a", "obs": "{a,b}", "p": third * (1 - p)},
        {"world": "w_a", "obs": "{a,c}", "p": third * p},
        {"world": "w_b", "obs": "{a,b}", "p": third},
        {"world": "w_c", "obs": "{a,c}", "p": third},
    ]
    return Scenario("three-prisoners", "event-observation", {
        "worlds": ["w_a", "w_b", "w_c"],
        "observations": [
            {"label": "{a,b}", "members": ["w_a", "w_b"]},  # jailer says c
            {"label": "{a,c}", "members": ["w_a", "w_c"]},  # jailer says b
        ],
        "joint": [r for r in joint if r["p"]],
        "param": p,
    })


def _monty(p: Fraction) -> Scenario:
    """Contestant picks door 1.  With the car behind door 1 the host opens door 3 with probability p."""
    third = Fraction(1, 3)
    joint = [
        {"world": "car1", "obs": "opens-2", "p": third * (1 - p)},
        {"world": "car1", "obs": "opens-3", "p": third * p},
        {"world": "car2", "obs": "opens-3", "p": third},
        {"world": "car3", "obs": "opens-2", "p": third},
    ]
    return Scenario("monty-hall", "event-observation", {
        "worlds": ["car1", "car2", "car3"],
        "observations": [
            {"label": "opens-2", "members": ["car1", "car3"]},
            {"label": "opens-3", "members": ["car1", "car2"]},
        ],
        "joint": [r for r in joint if r["p"]],
        "param": p,
    })


def _two_overlapping(_: Fraction) -> Scenario:
    """Two overlapping observations with all three atoms populated; CAR is impossible."""
    third = Fraction(1, 3)
    return Scenario("example-4-2", "event-observation", {
        "worlds": ["w1", "w2", "w3"],
        "observations": [
            {"label": "U1", "members": ["w1", "w2"]},
            {"label": "U2", "members": ["w2", "w3"]},
        ],
        "joint": [
            {"world": "w1", "obs": "U1", "p": third},
            {"world": "w2", "obs": "U1", "p": third / 2},
            {"world": "w2", "obs": "U2", "p": third / 2},
            {"world": "w3", "obs": "U2", "p": third},
        ],
    })


def _three_overlapping(_: Fraction) -> Scenario:
    """Three sets overlapping pairwise; only the two-set regions hold worlds."""
    sixth = Fraction(1, 6)
    obs = [("U1", ["a2", "a3"]), ("U2", ["a1", "a3"]), ("U3", ["a1", "a2"])]
    return Scenario("example-4-5", "event-observation", {
        "worlds": ["a1", "a2", "a3"],
        "observations": [{"label": lab, "members": ms} for lab, ms in obs],
        "joint": [{"world": w, "obs": lab, "p": sixth} for w in ["a1", "a2", "a3"]
                  for lab, ms in obs if w in ms],
    })


def _missing_at_random(theta: Fraction) -> Scenario:
    """A value is either reported exactly or missing (observe W), independently of the value."""
    prior = {"x1": Fraction(1, 2), "x2": Fraction(1, 3), "x3": Fraction(1, 6)}
    joint = []
    for w, pw in prior.items():
        joint.append({"world": w, "obs": "missing", "p": theta * pw})
        joint.append({"world": w, "obs": w, "p": (1 - theta) * pw})
    return Scenario("mar", "event-observation", {
        "worlds": list(prior),
        "observations": [{"label": "missing", "members": list(prior)}]
                        + [{"label": w, "members": [w]} for w in prior],
        "joint": [r for r in joint if r["p"]],
        "prior": [{"world": w, "p": p} for w, p in prior.items()],
        "param": theta,
    })


def _judy(_: Fraction) -> Scenario:
    """Blue/Red territory times HQ/Second company; told only P(HQ | Red) = 3/4."""
    worlds = ["BH", "BS", "RH", "RS"]
    return Scenario("judy-benjamin", "weighted-constraint", {
        "worlds": worlds,
        "prior": [{"world": w, "p": Fraction(1, 4)} for w in worlds],
        "constraints": [{"given": ["RH", "RS"], "event": ["RH"], "alpha": Fraction(3, 4)}],
        "queries": {"Blue": ["BH", "BS"]},
    })


BUILTINS: dict[str, tuple[Callable[[Fraction], Scenario], Fraction]] = {
    "monty-hall": (_monty, Fraction(1, 2)),
    "three-prisoners": (_prisoners, Fraction(1, 2)),
    "example-4-2": (_two_overlapping, Fraction(0)),
    "example-4-5": (_three_overlapping, Fraction(0)),
    "mar": (_missing_at_random, Fraction(1, 3)),
    "judy-benjamin": (_judy, Fraction(0)),
}


# descriptive names for the two structural examples
ALIASES = {"overlapping-pair": "example-4-2", "overlapping-triangle": "example-4-5"}


def builtin(name: str, param: Optional[Any] = None) -> Scenario:
    """A built-in scenario.  ``param`` is the host/jailer tie-break probability
    for the two puzzles and the missingness probability for ``mar``."""
    name = ALIASES.get(name, name)
    if name not in BUILTINS:
        raise UnknownScenario(f"unknown scenario {name!r}; choose from {', '.join(BUILTINS)}")
    factory, default = BUILTINS[name]
    p = default if param is None else io.rational(param, "parameter")
    if not 0 <= p <= 1:
        raise InvalidInput("the parameter must lie in [0,1]")
    return factory(p)


# -- reports -------------------------------------------------------------------

@dataclass(frozen=True)
class Report:
    doc: dict
    lines: tuple[str, ...]

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"

    def json(self) -> str:
        return io.dumps(self.doc)


def _dist(p: Mapping[str, Any]) -> dict:
    return {w: v for w, v in p.items()}


def _fmt_vec(v) -> str:
    return "(" + ",".join(str(x) for x in v) + ")"


def car_check_report(d: JointDistribution) -> Report:
    rep = car.check_car(d)
    doc = {
        "analysis": "car-check",
        "overall": rep.overall,
        "observations": {k: {"condA": c.cond_a, "condB": c.cond_b, "condC": c.cond_c, "condD": c.cond_d}
                         for k, c in rep.per_observation.items()},
        "witnesses": [{"U": w.observation, "w": w.world, "w_prime": w.other, "lhs": w.lhs, "rhs": w.rhs}
                      for w in rep.witnesses],
    }
    if rep.overall:
        lines = ["CAR holds for every observation"]
    else:
        seen = set()
        parts = []
        for w in rep.witnesses:
            if w.observation not in seen:
                seen.add(w.observation)
                parts.append(f"witness U={w.observation}: {w.lhs} vs {w.rhs}")
        lines = ["CAR fails; " + "; ".join(parts)]
    for k, c in rep.per_observation.items():
        lines.append(f"  {k}: {'holds' if c.holds else 'fails'}")
    return Report(doc, tuple(lines))


def feasibility_report(space: WorldSpace, obs: ObservationSet,
                       prior: Optional[NaiveDistribution] = None) -> Report:
    s = car.caracterizing_matrix(space, obs)
    if prior is None:
        rows = list(range(len(s.atoms)))
    else:
        rows = [i for i, a in enumerate(s.atoms) if sum(prior[w] for w in a.members) > 0]
    blockers = car.detect_blockers(s)
    gamma = car.solve_gamma(s, rows)
    doc: dict[str, Any] = {
        "analysis": "feasibility",
        "atoms": [{"members": list(a.members), "signature": sorted(a.signature)} for a in s.atoms],
        "matrix": s.as_lists(),
        "rows": rows,
        "gamma": {"status": gamma.status, "gamma": list(gamma.gamma) if gamma.gamma else None,
                  "basis": [list(b) for b in gamma.basis]},
        "blockers": [{"rows": list(b.rows), "kind": b.kind, "observation": b.observation,
                      "lambda": list(b.certificate.coefficients),
                      "combination": list(b.certificate.combination)} for b in blockers],
    }
    lines = [f"atoms: {len(s.atoms)}; matrix {_fmt_vec(tuple(_fmt_vec(r) for r in s.as_lists()))}"]
    if gamma.status == "Unique":
        line = f"unique γ={_fmt_vec(gamma.gamma)}"
        if prior is not None and len(rows) == s.matrix.cols:
            try:
                forced = car.forced_observation_distribution(s, rows, prior)
            except SingularMatrix:
                forced = None
            if forced is not None:
                doc["forced_observation_distribution"] = forced
                line += "; P_O forced: " + ", ".join(f"{k}={v}" for k, v in forced.items())
        lines.append(line)
    elif gamma.status == "Family":
        lines.append(f"a family of γ vectors, e.g. {_fmt_vec(gamma.gamma)}")
    else:
        lines.append(f"no CAR distribution on this support ({gamma.status})")
    if blockers:
        for b in blockers:
            target = f" observing {b.observation}" if b.observation else ""
            atoms = ", ".join("{" + ",".join(a) + "}" for a in b.atoms)
            lines.append(f"blocker {b.kind}: atoms {atoms}{target}; λ={_fmt_vec(b.certificate.coefficients)}")
    else:
        lines.append("no blocker found among tried subsets")
    return Report(doc, tuple(lines))


def cargen_roundtrip_report(d: JointDistribution, samples: int, seed: int) -> Report:
    params = cargen.synthesize_params(d)
    closed = cargen.closed_form_distribution(params, d.obs)
    sim = cargen.simulate(params, samples, seed, d.obs)
    tv = cargen.total_variation(sim.frequencies(), closed)
    doc = {
        "analysis": "cargen-roundtrip",
        "params": io.dump_cargen_params(params),
        "exact_match": closed == d,
        "simulation": {"samples": samples, "seed": seed, "total_variation": round(tv, 12),
                       "mean_iterations": round(sim.mean_iterations, 12)},
    }
    lines = [
        f"CARgen* parameters: {len(params.partitions)} partitions, q={params.q}",
        f"closed form reproduces the joint exactly: {closed == d}",
        f"simulation n={samples} seed={seed}: TV={tv:.6f}, mean iterations={sim.mean_iterations:.4f}",
    ]
    return Report(doc, tuple(lines))


def jeffrey_report(prior: NaiveDistribution, constraint: jeffrey.PartitionConstraint) -> Report:
    post = jeffrey.jeffrey_update(prior, constraint)
    doc = {"analysis": "jeffrey", "constraint": constraint.name, "posterior": _dist(post)}
    lines = [f"Jeffrey update on {constraint.name}:"]
    lines += [f"  {w}: {post[w]}" for w in post]
    return Report(doc, tuple(lines))


def mre_report(prior: NaiveDistribution, constraints: list[mre.LinearConstraint],
               queries: Optional[Mapping[str, list[str]]] = None) -> Report:
    sol = mre.mre_update(prior, constraints)
    doc: dict[str, Any] = {
        "analysis": "mre",
        "posterior": {w: round(v, 12) for w, v in sol.posterior.as_dict().items()},
        "beta": [round(b, 12) for b in sol.beta],
        "residuals": [float(f"{r:.3e}") for r in sol.residuals],
        "relative_entropy_bits": round(mre.relative_entropy(sol.posterior, prior), 12),
    }
    lines = ["MRE posterior:"] + [f"  {w}: {v:.6f}" for w, v in sol.posterior.as_dict().items()]
    lines.append("tilt β=" + _fmt_vec(f"{b:.6f}" for b in sol.beta))
    if queries:
        doc["queries"] = {}
        for name, members in queries.items():
            before = prior.prob(members)
            after = sol.posterior.prob(members)
            doc["queries"][name] = {"prior": before, "posterior": round(after, 12),
                                    "above_prior": after > float(before)}
            note = " (rises although nothing was learned about it)" if after > float(before) + 1e-9 else ""
            lines.append(f"P({name}) = {after:.6f}, prior {before}{note}")
    return Report(doc, tuple(lines))


def gcar_report(space: WorldSpace, prior: NaiveDistribution,
                constraints: list[jeffrey.PartitionConstraint]) -> Report:
    cells = constraints[0].cells
    conditionals = [jeffrey.jeffrey_update(prior, jeffrey.PartitionConstraint(
        cells, tuple(Fraction(int(k == j)) for k in range(len(cells))))) for j in range(len(cells))]
    weights = [Fraction(1, len(constraints))] * len(constraints)
    d = jeffrey.construct_gcar_distribution(space, constraints, weights, conditionals)
    acc = jeffrey.check_accuracy(d)
    checks = [jeffrey.check_generalized_car(d, k, i)
              for k in range(len(constraints)) for i in range(len(cells))]
    doc = {
        "analysis": "gcar",
        "joint": [{"world": w, "obs": c, "p": p} for (w, c), p in d.items()],
        "accurate": acc.overall,
        "checks": [{"constraint": c.constraint, "cell": c.cell, "condA": c.cond_a, "condB": c.cond_b}
                   for c in checks],
        "all_cells": all(c.holds for c in checks),
    }
    lines = [f"generated joint over {len(constraints)} constraints with uniform P_O",
             f"accurate: {acc.overall}; generalized CAR on every cell: {doc['all_cells']}"]
    return Report(doc, tuple(lines))


def compare_updates_report(s: Scenario) -> Report:
    """Side by side: naive conditioning, Jeffrey, MRE, and sophisticated conditioning."""
    if s.kind == "event-observation":
        d = s.joint()
        prior = marginal_world(d)
        rows = {}
        lines = []
        for u, pu in marginal_obs(d).items():
            if pu == 0:
                continue
            event = d.obs.resolve(u)
            soph = condition_sophisticated(d, u)
            naive = condition_naive(prior, event)
            # Jeffrey with all weight on U is ordinary conditioning, and so is MRE on "U is certain"
            rest = [w for w in d.space if w not in event]
            cells = [(event.members, 1)] + ([(rest, 0)] if rest else [])
            jeff = jeffrey.jeffrey_update(prior, jeffrey.PartitionConstraint.of(d.space, cells))
            rows[u] = {"sophisticated": _dist(soph), "naive": _dist(naive), "jeffrey": _dist(jeff),
                       "agree": soph == naive}
            lines.append(f"observe {u} (probability {pu}): "
                         + ("naive agrees" if soph == naive else "naive differs"))
            for w in d.space.ordered(event.members):
                lines.append(f"  {w}: sophisticated {soph[w]}, naive {naive[w]}, Jeffrey {jeff[w]}")
        return Report({"analysis": "compare-updates", "observations": rows}, tuple(lines))

    prior = s.prior()
    space = s.space()
    doc: dict[str, Any] = {"analysis": "compare-updates", "prior": _dist(prior)}
    lines = []
    docs = s.constraint_docs()
    linear = io.parse_linear_constraints(space, docs)
    sol = mre.mre_update(prior, linear)
    doc["mre"] = {w: round(v, 12) for w, v in sol.posterior.as_dict().items()}
    partitions = [d for d in docs if io.constraint_kind(d) == "partition"]
    if len(partitions) == 1 and len(docs) == 1:
        jeff = jeffrey.jeffrey_update(prior, io.parse_partition_constraint(space, partitions[0]))
        doc["jeffrey"] = _dist(jeff)
    for w in space:
        extra = f", Jeffrey {doc['jeffrey'][w]}" if "jeffrey" in doc else ""
        lines.append(f"  {w}: prior {prior[w]}, MRE {doc['mre'][w]:.6f}{extra}")
    lines.insert(0, "naive updates (no sophisticated space is modeled):")
    return Report(doc, tuple(lines))


def run_report(s: Scenario, analysis: str, *, samples: int = 100_000, seed: int = 0) -> Report:
    if analysis not in ANALYSES:
        raise InvalidInput(f"unknown analysis {analysis!r}; choose from {', '.join(ANALYSES)}")
    event = s.kind == "event-observation"
    if analysis == "car-check" and event:
        return car_check_report(s.joint())
    if analysis == "feasibility" and event:
        prior = s.prior() if ("prior" in s.payload or "joint" in s.payload) else None
        return feasibility_report(s.space(), s.observations(), prior)
    if analysis == "cargen-roundtrip" and event:
        return cargen_roundtrip_report(s.joint(), samples, seed)
    if analysis == "compare-updates":
        return compare_updates_report(s)
    docs = s.constraint_docs()
    partitions = [io.parse_partition_constraint(s.space(), d) for d in docs
                  if io.constraint_kind(d) == "partition"]
    if analysis == "jeffrey" and len(partitions) == 1:
        return jeffrey_report(s.prior(), partitions[0])
    if analysis == "gcar" and partitions:
        return gcar_report(s.space(), s.prior(), partitions)
    if analysis == "mre" and docs:
        return mre_report(s.prior(), io.parse_linear_constraints(s.space(), docs),
                          s.payload.get("queries"))
    raise InapplicableAnalysis(f"{analysis} does not apply to {s.name} ({s.kind})")

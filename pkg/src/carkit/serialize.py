"""JSON reading and writing.

Numbers are parsed as Decimals and turned into exact Fractions, so a file
that says ``0.7`` means exactly 7/10.  Rationals are written back as
``"n/d"`` strings.
"""

from __future__ import annotations

import json
from decimal import Decimal
from fractions import Fraction
from pathlib import Path
from typing import Any, Mapping, Sequence, Union

from carkit.cargen import CarGenParams, Partition
from carkit.errors import InvalidInput
from carkit.jeffrey import PartitionConstraint
from carkit.mre import LinearConstraint, WeightedEventConstraint, conditional_to_linear
from carkit.rational import to_fraction
from carkit.space import Event, JointDistribution, NaiveDistribution, ObservationSet, WorldSpace


def loads(text: str) -> Any:
    try:
        return json.loads(text, parse_float=Decimal)
    except json.JSONDecodeError as exc:
        raise InvalidInput(f"malformed JSON: {exc}") from exc


def load_file(path: Union[str, Path]) -> Any:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InvalidInput(f"cannot read {path}: {exc}") from exc
    return loads(text)


def _jsonable(value: Any) -> Any:
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, Decimal):
        return str(Fraction(value))
    if isinstance(value, float):
        return value
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, (frozenset, set)):
        return sorted(_jsonable(v) for v in value)
    return value


def dumps(doc: Any) -> str:
    return json.dumps(_jsonable(doc), indent=2, ensure_ascii=False) + "\n"


def rational(value: Any, what: str = "probability") -> Fraction:
    try:
        return to_fraction(value)
    except (TypeError, ValueError, ZeroDivisionError) as exc:
        raise InvalidInput(f"bad {what}: {value!r}") from exc


def _require(doc: Mapping[str, Any], key: str) -> Any:
    if not isinstance(doc, Mapping) or key not in doc:
        raise InvalidInput(f"missing field {key!r}")
    return doc[key]


def _members(items: Any) -> list[str]:
    if not isinstance(items, list) or not all(isinstance(w, str) for w in items):
        raise InvalidInput("members must be a list of world names")
    return items


# -- spaces, observations, distributions ---------------------------------------

def parse_space(doc: Mapping[str, Any]) -> WorldSpace:
    return WorldSpace(tuple(_members(_require(doc, "worlds"))))


def parse_observations(space: WorldSpace, items: Sequence[Mapping[str, Any]]) -> ObservationSet:
    return ObservationSet(tuple(space.event(_members(_require(o, "members")), o.get("label"))
                                for o in items))


def parse_joint(space: WorldSpace, obs: ObservationSet, items: Sequence[Mapping[str, Any]]) -> JointDistribution:
    mass = {}
    for run in items:
        key = (_require(run, "world"), _require(run, "obs"))
        if key in mass:
            raise InvalidInput(f"run {key} listed twice")
        mass[key] = rational(_require(run, "p"))
    return JointDistribution(space, obs, mass)


def parse_prior(space: WorldSpace, items: Sequence[Mapping[str, Any]]) -> NaiveDistribution:
    mass = {}
    for entry in items:
        w = _require(entry, "world")
        if w in mass:
            raise InvalidInput(f"world {w} listed twice")
        mass[w] = rational(_require(entry, "p"))
    return NaiveDistribution(space, mass)


def dump_observations(obs: ObservationSet) -> list[dict]:
    return [{"label": o.name, "members": sorted(o.members)} for o in obs]


def dump_joint(d: JointDistribution) -> list[dict]:
    return [{"world": w, "obs": o, "p": p} for (w, o), p in d.items()]


def dump_prior(p: NaiveDistribution) -> list[dict]:
    return [{"world": w, "p": p[w]} for w in p.space]


# -- constraints ------------------------------------------------------------

def parse_partition_constraint(space: WorldSpace, doc: Mapping[str, Any]) -> PartitionConstraint:
    cells = [(_members(_require(c, "members")), rational(_require(c, "alpha"), "alpha"))
             for c in _require(doc, "cells")]
    return PartitionConstraint.of(space, cells, doc.get("label"))


def dump_partition_constraint(c: PartitionConstraint) -> dict:
    doc: dict[str, Any] = {"cells": [{"members": sorted(e.members), "alpha": a}
                                     for e, a in zip(c.cells, c.alphas)]}
    if c.label is not None:
        doc["label"] = c.label
    return doc


def constraint_kind(doc: Mapping[str, Any]) -> str:
    for key, kind in (("cells", "partition"), ("terms", "weighted"),
                      ("coeffs", "linear"), ("given", "conditional")):
        if isinstance(doc, Mapping) and key in doc:
            return kind
    raise InvalidInput("unrecognized constraint: expected cells, terms, coeffs or given")


def parse_linear_constraints(space: WorldSpace, doc: Any) -> list[LinearConstraint]:
    """Any constraint document (or a list of them) as linear expectation constraints."""
    if isinstance(doc, list):
        out = []
        for d in doc:
            out.extend(parse_linear_constraints(space, d))
        return out
    kind = constraint_kind(doc)
    if kind == "partition":
        c = parse_partition_constraint(space, doc)
        return [LinearConstraint({w: 1 for w in e.members}, a) for e, a in zip(c.cells, c.alphas)]
    if kind == "weighted":
        terms = [(space.event(_members(_require(t, "members"))), rational(_require(t, "alpha"), "alpha"))
                 for t in doc["terms"]]
        c = WeightedEventConstraint(tuple(terms))
        return [LinearConstraint({w: 1 for w in e.members}, a) for e, a in c.terms]
    if kind == "linear":
        coeffs = doc["coeffs"]
        if not isinstance(coeffs, Mapping):
            raise InvalidInput("coeffs must map worlds to numbers")
        for w in coeffs:
            if w not in space:
                raise InvalidInput(f"unknown world {w!r}")
        return [LinearConstraint({w: rational(v, "coefficient") for w, v in coeffs.items()},
                                 rational(doc.get("target", 0), "target"))]
    given = space.event(_members(doc["given"]))
    event = space.event(_members(_require(doc, "event")))
    return [conditional_to_linear(event, given, rational(_require(doc, "alpha"), "alpha"))]


def parse_weighted_constraint(space: WorldSpace, doc: Mapping[str, Any]) -> WeightedEventConstraint:
    terms = [(space.event(_members(_require(t, "members"))), rational(_require(t, "alpha"), "alpha"))
             for t in _require(doc, "terms")]
    return WeightedEventConstraint(tuple(terms))


# -- CARgen parameters --------------------------------------------------------

def parse_cargen_params(doc: Mapping[str, Any]) -> CarGenParams:
    space = parse_space(doc)
    prior = parse_prior(space, _require(doc, "prior"))
    partitions, weights = [], []
    for part in _require(doc, "partitions"):
        cells, reject = [], []
        for cell in _require(part, "cells"):
            cells.append(space.event(_members(_require(cell, "members")), cell.get("label")))
            reject.append(rational(cell.get("reject", 0), "rejection probability"))
        partitions.append(Partition(tuple(cells), tuple(reject)))
        weights.append(rational(_require(part, "p"), "partition weight"))
    params = CarGenParams(prior, tuple(partitions), tuple(weights), Fraction(0))
    if "q" in doc:
        q = rational(doc["q"], "q")
    else:
        support = prior.support()
        q = params.loop_probability(support[0]) if support else Fraction(0)
    return CarGenParams(prior, params.partitions, params.weights, q)


def dump_cargen_params(p: CarGenParams) -> dict:
    return {
        "worlds": list(p.prior.space.worlds),
        "prior": dump_prior(p.prior),
        "partitions": [
            {"p": w, "cells": [{"members": sorted(c.members), "reject": r}
                               for c, r in zip(part.cells, part.reject)]}
            for part, w in zip(p.partitions, p.weights)
        ],
        "q": p.q,
    }


def parse_events(space: WorldSpace, items: Sequence[Any]) -> list[Event]:
    return [space.event(_members(m)) for m in items]

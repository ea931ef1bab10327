"""Naive and sophisticated probability spaces.

The naive space is a finite set of worlds.  The sophisticated space is the
set of runs ``(w, U)``: the actual world together with the single event the
agent observes.  Observations are accurate, so a run only exists when
``w`` is a member of ``U``.  All probabilities are exact Fractions.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Optional, Sequence, Union

from carkit.errors import (
    InvalidDistribution,
    InvalidInput,
    ZeroProbabilityEvent,
    ZeroProbabilityObservation,
)
from carkit.rational import RationalLike, to_fraction

ZERO = Fraction(0)
ONE = Fraction(1)


@dataclass(frozen=True)
class WorldSpace:
    worlds: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "worlds", tuple(self.worlds))
        if not self.worlds:
            raise InvalidInput("a world space needs at least one world")
        if len(set(self.worlds)) != len(self.worlds):
            raise InvalidInput("world identifiers must be unique")

    def __iter__(self) -> Iterator[str]:
        return iter(self.worlds)

    def __len__(self) -> int:
        return len(self.worlds)

    def __contains__(self, w: object) -> bool:
        return w in self.worlds

    def index(self, w: str) -> int:
        return self.worlds.index(w)

    def event(self, members: Iterable[str], label: Optional[str] = None) -> "Event":
        ev = Event(frozenset(members), label)
        missing = ev.members - set(self.worlds)
        if missing:
            raise InvalidInput(f"unknown worlds {sorted(missing)}")
        return ev

    def full(self, label: Optional[str] = None) -> "Event":
        return Event(frozenset(self.worlds), label)

    def ordered(self, members: Iterable[str]) -> list[str]:
        """Members sorted by their position in the world space."""
        ms = set(members)
        return [w for w in self.worlds if w in ms]


@dataclass(frozen=True)
class Event:
    """A set of worlds.  Identity is by member set; the label is cosmetic."""

    members: frozenset[str]
    label: Optional[str] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "members", frozenset(self.members))

    def __contains__(self, w: object) -> bool:
        return w in self.members

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self.members))

    def __len__(self) -> int:
        return len(self.members)

    @property
    def name(self) -> str:
        if self.label is not None:
            return self.label
        return "{" + ",".join(sorted(self.members)) + "}"

    def sorted_members(self) -> list[str]:
        return sorted(self.members)


@dataclass(frozen=True)
class ObservationSet:
    observations: tuple[Event, ...]

    def __post_init__(self) -> None:
        obs = tuple(self.observations)
        object.__setattr__(self, "observations", obs)
        if not obs:
            raise InvalidInput("need at least one observation")
        if any(len(o) == 0 for o in obs):
            raise InvalidInput("observations must be nonempty")
        names = [o.name for o in obs]
        if len(set(names)) != len(names):
            raise InvalidInput("observation labels must be unique")
        if len({o.members for o in obs}) != len(obs):
            raise InvalidInput("two observations denote the same event")

    def __iter__(self) -> Iterator[Event]:
        return iter(self.observations)

    def __len__(self) -> int:
        return len(self.observations)

    def __getitem__(self, i: int) -> Event:
        return self.observations[i]

    @property
    def labels(self) -> list[str]:
        return [o.name for o in self.observations]

    def resolve(self, key: Union[str, Event, int]) -> Event:
        """Find an observation by label, by member set, or by index."""
        if isinstance(key, int):
            return self.observations[key]
        if isinstance(key, Event):
            for o in self.observations:
                if o.members == key.members:
                    return o
            raise InvalidInput(f"{key.name} is not a possible observation")
        for o in self.observations:
            if o.name == key:
                return o
        raise InvalidInput(f"unknown observation {key!r}")

    def index(self, key: Union[str, Event]) -> int:
        return self.observations.index(self.resolve(key))


def _sum(values: Iterable[Fraction]) -> Fraction:
    return sum(values, ZERO)


class NaiveDistribution(Mapping[str, Fraction]):
    """Probability distribution on the worlds of a :class:`WorldSpace`."""

    __slots__ = ("space", "_mass")

    def __init__(self, space: WorldSpace, mass: Mapping[str, RationalLike]):
        unknown = set(mass) - set(space.worlds)
        if unknown:
            raise InvalidDistribution(f"mass on unknown worlds {sorted(unknown)}")
        full = {w: to_fraction(mass.get(w, 0)) for w in space.worlds}
        if any(v < 0 for v in full.values()):
            raise InvalidDistribution("negative probability")
        total = _sum(full.values())
        if total != 1:
            raise InvalidDistribution(f"masses sum to {total}, not 1")
        self.space = space
        self._mass = full

    @classmethod
    def uniform(cls, space: WorldSpace, support: Optional[Iterable[str]] = None) -> "NaiveDistribution":
        sup = list(support) if support is not None else list(space.worlds)
        return cls(space, {w: Fraction(1, len(sup)) for w in sup})

    def __getitem__(self, w: str) -> Fraction:
        return self._mass[w]

    def __iter__(self) -> Iterator[str]:
        return iter(self.space.worlds)

    def __len__(self) -> int:
        return len(self._mass)

    def __eq__(self, other: object) -> bool:
        if isinstance(other, NaiveDistribution):
            return self.space == other.space and self._mass == other._mass
        return NotImplemented

    def __hash__(self) -> int:
        return hash((self.space, tuple(self._mass.items())))

    def __repr__(self) -> str:
        inner = ", ".join(f"{w}: {p}" for w, p in self._mass.items())
        return f"NaiveDistribution({{{inner}}})"

    def prob(self, event: Union[Event, Iterable[str]]) -> Fraction:
        members = event.members if isinstance(event, Event) else set(event)
        return _sum(p for w, p in self._mass.items() if w in members)

    def support(self) -> list[str]:
        return [w for w, p in self._mass.items() if p > 0]


RunKey = tuple[str, str]


class JointDistribution:
    """Distribution on runs ``(world, observation)``.

    ``mass`` is keyed by ``(world, observation label)``.  Runs with ``w``
    outside the observed event are rejected, which is how accuracy of
    observations is enforced.
    """

    __slots__ = ("space", "obs", "_mass")

    def __init__(self, space: WorldSpace, obs: ObservationSet,
                 mass: Mapping[tuple[str, Union[str, Event]], RationalLike]):
        table: dict[RunKey, Fraction] = {}
        for (w, key), p in mass.items():
            if w not in space:
                raise InvalidDistribution(f"unknown world {w!r}")
            o = obs.resolve(key)
            if w not in o:
                raise InvalidDistribution(f"inaccurate run: {w} is not in {o.name}")
            value = to_fraction(p)
            if value < 0:
                raise InvalidDistribution("negative probability")
            k = (w, o.name)
            table[k] = table.get(k, ZERO) + value
        total = _sum(table.values())
        if total != 1:
            raise InvalidDistribution(f"run masses sum to {total}, not 1")
        self.space = space
        self.obs = obs
        self._mass = {k: v for k, v in table.items() if v != 0}

    def mass(self, w: str, key: Union[str, Event]) -> Fraction:
        return self._mass.get((w, self.obs.resolve(key).name), ZERO)

    def items(self) -> Iterator[tuple[RunKey, Fraction]]:
        """Runs with positive mass, in world-then-observation order."""
        for w in self.space:
            for o in self.obs:
                p = self._mass.get((w, o.name))
                if p:
                    yield (w, o.name), p

    def runs(self) -> dict[tuple[str, frozenset[str]], Fraction]:
        """Positive-mass runs keyed by member sets, independent of labels."""
        return {(w, self.obs.resolve(lab).members): p for (w, lab), p in self._mass.items()}

    def __eq__(self, other: object) -> bool:
        if isinstance(other, JointDistribution):
            return set(self.space.worlds) == set(other.space.worlds) and self.runs() == other.runs()
        return NotImplemented

    __hash__ = None  # type: ignore[assignment]

    def __repr__(self) -> str:
        inner = ", ".join(f"({w},{o}): {p}" for (w, o), p in self.items())
        return f"JointDistribution({{{inner}}})"

    # convenience wrappers used throughout the analysis code
    def p_world(self, w: str) -> Fraction:
        return _sum(self._mass.get((w, o.name), ZERO) for o in self.obs)

    def p_obs(self, key: Union[str, Event]) -> Fraction:
        name = self.obs.resolve(key).name
        return _sum(self._mass.get((w, name), ZERO) for w in self.space)

    def p_in(self, event: Union[Event, Iterable[str]]) -> Fraction:
        members = event.members if isinstance(event, Event) else set(event)
        return _sum(self.p_world(w) for w in members)


def marginal_world(d: JointDistribution) -> NaiveDistribution:
    return NaiveDistribution(d.space, {w: d.p_world(w) for w in d.space})


def marginal_obs(d: JointDistribution) -> dict[str, Fraction]:
    return {o.name: d.p_obs(o) for o in d.obs}


def condition_sophisticated(d: JointDistribution, key: Union[str, Event]) -> NaiveDistribution:
    """Posterior on worlds after observing ``key``, computed on runs."""
    o = d.obs.resolve(key)
    z = d.p_obs(o)
    if z == 0:
        raise ZeroProbabilityObservation(f"{o.name} is observed with probability 0")
    return NaiveDistribution(d.space, {w: d.mass(w, o) / z for w in o.members})


def condition_naive(p: NaiveDistribution, event: Union[Event, Iterable[str]]) -> NaiveDistribution:
    """Ordinary Bayesian conditioning of a world distribution on an event."""
    members = event.members if isinstance(event, Event) else frozenset(event)
    z = p.prob(members)
    if z == 0:
        raise ZeroProbabilityEvent("conditioning event has probability 0")
    return NaiveDistribution(p.space, {w: p[w] / z for w in members})


def joint_from_conditionals(prior: NaiveDistribution, obs: ObservationSet,
                            protocol: Mapping[str, Mapping[str, RationalLike]]) -> JointDistribution:
    """Build a joint from a world prior and per-world reporting probabilities.

    ``protocol[w][label]`` is Pr(X_O = label | X_W = w); rows for worlds with
    zero prior mass may be omitted.
    """
    mass: dict[tuple[str, str], Fraction] = {}
    for w in prior.space:
        pw = prior[w]
        if pw == 0:
            continue
        row = {k: to_fraction(v) for k, v in protocol.get(w, {}).items()}
        if _sum(row.values()) != 1:
            raise InvalidDistribution(f"reporting probabilities for {w} do not sum to 1")
        for label, q in row.items():
            if q:
                mass[(w, label)] = pw * q
    return JointDistribution(prior.space, obs, mass)


def observations(space: WorldSpace, spec: Sequence[tuple[str, Iterable[str]]]) -> ObservationSet:
    """Shorthand: ``observations(space, [("U1", ["a", "b"]), ...])``."""
    return ObservationSet(tuple(space.event(ms, label) for label, ms in spec))

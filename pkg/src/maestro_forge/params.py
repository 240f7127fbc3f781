"""Tunable parameter space: declaration, sampling, mutation, inheritance.

A ConfigAssignment is a plain dict mapping parameter names to values.  Text
parameters hold space-joined token sequences over a declared vocabulary;
numeric parameters mutate on a range/10 step, which also defines the
11-point lattice used by the exhaustive oracles.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass

from .errors import MissingParam, OutOfDomain, SpaceTooLarge

ConfigAssignment = dict


@dataclass(frozen=True)
class ParamRef:
    """Marks an adapter/merge field whose value comes from the assignment."""

    name: str


@dataclass(frozen=True)
class ParamSpec:
    name: str
    owner: str  # node-id, edge-id, or "merge:<node-id>"
    kind: str  # choice | int | float | text
    choices: tuple = ()
    lo: float = 0.0
    hi: float = 0.0
    vocabulary: tuple[str, ...] = ()
    max_tokens: int = 0
    initial_text: str = ""

    def __post_init__(self):
        if self.kind == "choice":
            if not self.choices or len(set(self.choices)) != len(self.choices):
                raise ValueError(f"{self.name}: choice list must be nonempty and duplicate-free")
        elif self.kind in ("int", "float"):
            if self.lo > self.hi:
                raise ValueError(f"{self.name}: lo must be <= hi")
        elif self.kind == "text":
            if not self.vocabulary:
                raise ValueError(f"{self.name}: vocabulary must be nonempty")
            if self.max_tokens < 0:
                raise ValueError(f"{self.name}: max_tokens must be >= 0")
        else:
            raise ValueError(f"{self.name}: unknown param kind {self.kind!r}")


def choice_param(name, owner, values) -> ParamSpec:
    return ParamSpec(name, owner, "choice", choices=tuple(values))


def int_param(name, owner, lo, hi) -> ParamSpec:
    return ParamSpec(name, owner, "int", lo=int(lo), hi=int(hi))


def float_param(name, owner, lo, hi) -> ParamSpec:
    return ParamSpec(name, owner, "float", lo=float(lo), hi=float(hi))


def text_param(name, owner, vocabulary, max_tokens, initial="") -> ParamSpec:
    return ParamSpec(
        name, owner, "text", vocabulary=tuple(vocabulary), max_tokens=int(max_tokens), initial_text=initial
    )


@dataclass(frozen=True)
class ConfigSpace:
    params: tuple[ParamSpec, ...] = ()

    def __post_init__(self):
        names = [p.name for p in self.params]
        if len(names) != len(set(names)):
            raise ValueError("parameter names must be unique within a space")

    def __iter__(self):
        return iter(self.params)

    def __len__(self):
        return len(self.params)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.params)

    def get(self, name: str) -> ParamSpec:
        for p in self.params:
            if p.name == name:
                return p
        raise KeyError(name)

    def has(self, name: str) -> bool:
        return any(p.name == name for p in self.params)

    def without(self, names) -> "ConfigSpace":
        dropped = set(names)
        return ConfigSpace(tuple(p for p in self.params if p.name not in dropped))

    def with_params(self, new: tuple[ParamSpec, ...]) -> "ConfigSpace":
        return ConfigSpace(self.params + tuple(new))


def _tokens(value: str) -> list[str]:
    return value.split()


def _value_in_domain(spec: ParamSpec, value) -> bool:
    if spec.kind == "choice":
        return value in spec.choices
    if spec.kind == "int":
        return isinstance(value, int) and not isinstance(value, bool) and spec.lo <= value <= spec.hi
    if spec.kind == "float":
        return isinstance(value, (int, float)) and not isinstance(value, bool) and spec.lo <= value <= spec.hi
    toks = _tokens(value) if isinstance(value, str) else None
    return toks is not None and len(toks) <= spec.max_tokens and all(t in spec.vocabulary for t in toks)


def validate_assignment(space: ConfigSpace, assignment: ConfigAssignment) -> None:
    """Check that the assignment is total over the space and in-domain."""
    for spec in space:
        if spec.name not in assignment:
            raise MissingParam(spec.name)
        if not _value_in_domain(spec, assignment[spec.name]):
            raise OutOfDomain(spec.name, f"value {assignment[spec.name]!r} outside domain")
    for name in assignment:
        if not space.has(name):
            raise OutOfDomain(name, "not declared in the space")


def default_value(spec: ParamSpec):
    if spec.kind == "choice":
        return spec.choices[0]
    if spec.kind == "int":
        return int(spec.lo)
    if spec.kind == "float":
        return float(spec.lo)
    return spec.initial_text


def default_assignment(space: ConfigSpace) -> ConfigAssignment:
    return {spec.name: default_value(spec) for spec in space}


def sample_assignment(space: ConfigSpace, seed: int) -> ConfigAssignment:
    """Uniform sample per parameter kind; pure in (space, seed)."""
    rng = random.Random(seed)
    out: ConfigAssignment = {}
    for spec in space:
        if spec.kind == "choice":
            out[spec.name] = rng.choice(spec.choices)
        elif spec.kind == "int":
            out[spec.name] = rng.randint(int(spec.lo), int(spec.hi))
        elif spec.kind == "float":
            out[spec.name] = rng.uniform(spec.lo, spec.hi)
        else:
            if spec.max_tokens == 0:
                out[spec.name] = ""
            else:
                length = rng.randint(1, spec.max_tokens)
                out[spec.name] = " ".join(rng.choice(spec.vocabulary) for _ in range(length))
    return out


def mutation_step(spec: ParamSpec) -> float:
    if spec.kind == "int":
        return max(1, int(round((spec.hi - spec.lo) / 10)))
    return (spec.hi - spec.lo) / 10


def _mutate_value(spec: ParamSpec, value, rng: random.Random):
    if spec.kind == "choice":
        return rng.choice(spec.choices)
    if spec.kind == "int":
        step = int(mutation_step(spec))
        moved = value + (step if rng.random() < 0.5 else -step)
        return int(min(max(moved, spec.lo), spec.hi))
    if spec.kind == "float":
        step = mutation_step(spec)
        moved = value + (step if rng.random() < 0.5 else -step)
        return float(min(max(moved, spec.lo), spec.hi))
    toks = _tokens(value)
    ops = []
    if len(toks) < spec.max_tokens:
        ops.append("insert")
    if toks:
        ops.extend(["delete", "replace"])
    if not ops:
        return value
    op = rng.choice(ops)
    if op == "insert":
        pos = rng.randint(0, len(toks))
        toks.insert(pos, rng.choice(spec.vocabulary))
    elif op == "delete":
        toks.pop(rng.randrange(len(toks)))
    else:
        toks[rng.randrange(len(toks))] = rng.choice(spec.vocabulary)
    return " ".join(toks)


def mutate_assignment(
    space: ConfigSpace,
    assignment: ConfigAssignment,
    intensity: int,
    seed: int,
    params: tuple[str, ...] | None = None,
) -> ConfigAssignment:
    """Apply ``intensity`` primitive edits, each on one parameter.

    ``params`` restricts the pool of editable parameters (used by warm
    starts and feedback-directed evolution).  Deterministic in ``seed``.
    """
    rng = random.Random(seed)
    pool = tuple(params) if params is not None else space.names
    out = dict(assignment)
    if not pool:
        return out
    for _ in range(intensity):
        name = pool[rng.randrange(len(pool))]
        spec = space.get(name)
        out[name] = _mutate_value(spec, out[name], rng)
    return out


def _clamp_into(spec: ParamSpec, value):
    """Carry an old value into a (possibly narrower) domain, clamping."""
    if spec.kind == "choice":
        return value if value in spec.choices else default_value(spec)
    if spec.kind == "int":
        if not isinstance(value, int) or isinstance(value, bool):
            return default_value(spec)
        return int(min(max(value, spec.lo), spec.hi))
    if spec.kind == "float":
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            return default_value(spec)
        return float(min(max(value, spec.lo), spec.hi))
    if not isinstance(value, str):
        return default_value(spec)
    toks = [t for t in _tokens(value) if t in spec.vocabulary][: spec.max_tokens]
    return " ".join(toks)


def inherit_assignment(new_space: ConfigSpace, old: ConfigAssignment) -> ConfigAssignment:
    """Warm-start an assignment for a changed space.

    Shared names carry their values (clamped into the new domain), new
    names take defaults, removed names are dropped.
    """
    out: ConfigAssignment = {}
    for spec in new_space:
        if spec.name in old:
            out[spec.name] = _clamp_into(spec, old[spec.name])
        else:
            out[spec.name] = default_value(spec)
    return out


# --- discretized grids (shared by search strategies and oracles) ---

FLOAT_GRID_POINTS = 11


def float_grid(spec: ParamSpec) -> tuple[float, ...]:
    if spec.hi == spec.lo:
        return (float(spec.lo),)
    step = (spec.hi - spec.lo) / (FLOAT_GRID_POINTS - 1)
    return tuple(float(spec.lo + i * step) for i in range(FLOAT_GRID_POINTS))


def grid_values(spec: ParamSpec) -> list:
    """The discretized domain of one parameter, in deterministic order."""
    if spec.kind == "choice":
        return list(spec.choices)
    if spec.kind == "int":
        return list(range(int(spec.lo), int(spec.hi) + 1))
    if spec.kind == "float":
        return list(float_grid(spec))
    values = []
    for length in range(spec.max_tokens + 1):
        for combo in itertools.product(spec.vocabulary, repeat=length):
            values.append(" ".join(combo))
    return values


def grid_size(space: ConfigSpace, cap: int = 10**7) -> int:
    """Number of grid combinations, or ``cap`` when it would exceed it."""
    total = 1
    for spec in space:
        if spec.kind == "choice":
            n = len(spec.choices)
        elif spec.kind == "int":
            n = int(spec.hi) - int(spec.lo) + 1
        elif spec.kind == "float":
            n = len(float_grid(spec))
        else:
            v = len(spec.vocabulary)
            n = sum(v**length for length in range(spec.max_tokens + 1))
        total *= max(1, n)
        if total >= cap:
            return cap
    return total


def enumerate_grid(space: ConfigSpace, cap: int = 10**4):
    """Yield every grid assignment; SpaceTooLarge beyond ``cap``."""
    if grid_size(space, cap + 1) > cap:
        raise SpaceTooLarge(f"discretized space exceeds {cap} combinations")
    if not len(space):
        yield {}
        return
    names = space.names
    for combo in itertools.product(*(grid_values(spec) for spec in space)):
        yield dict(zip(names, combo))


def snap_to_grid(spec: ParamSpec, value):
    """Round a proposed value onto the parameter's grid (floats only)."""
    if spec.kind != "float":
        return value
    grid = float_grid(spec)
    return min(grid, key=lambda g: (abs(g - value), g))


def assignment_key(assignment: ConfigAssignment) -> tuple:
    """Hashable identity of an assignment, for dedup in search."""
    return tuple(sorted(assignment.items()))

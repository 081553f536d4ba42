"""Core domain model for migration-aware VM consolidation.

Capacities, loads and demands are pairs of non-negative integers (cpu cores,
memory units); all bookkeeping is exact integer arithmetic.  Scalar measures
(relative VM size, surrogate host load, load angles) are exact rationals so
that every ordering decision is deterministic and platform independent.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Sequence

__all__ = [
    "ResourceVec",
    "Flavor",
    "Host",
    "VM",
    "Instance",
    "Mapping",
    "ObjectiveWeights",
    "InstanceFormatError",
    "InfeasibleInstanceError",
    "angle_key",
    "angle_cmp",
    "load",
    "free",
    "fits",
    "active_hosts",
    "migrated_memory",
    "objective",
    "host_migration_cost",
    "vm_size",
    "surrogate_load",
    "instance_from_dict",
    "instance_to_dict",
    "load_instance",
    "save_instance",
    "instance_with_mapping",
]


class InstanceFormatError(ValueError):
    """A malformed instance document: bad type, bad id, dangling reference."""


class InfeasibleInstanceError(ValueError):
    """An initial mapping that overloads some host."""


@dataclass(frozen=True)
class ResourceVec:
    """A (cpu, mem) pair of non-negative integers.

    Memory is counted in abstract units; the command-line layer treats one
    unit as 1 MiB.
    """

    cpu: int
    mem: int

    def __post_init__(self) -> None:
        for name in ("cpu", "mem"):
            value = getattr(self, name)
            if type(value) is not int:
                raise TypeError(f"{name} must be an int, got {type(value).__name__}")
            if value < 0:
                raise ValueError(f"{name} must be non-negative, got {value}")

    def __add__(self, other: "ResourceVec") -> "ResourceVec":
        return ResourceVec(self.cpu + other.cpu, self.mem + other.mem)

    def __sub__(self, other: "ResourceVec") -> "ResourceVec":
        return ResourceVec(self.cpu - other.cpu, self.mem - other.mem)

    def fits_within(self, other: "ResourceVec") -> bool:
        """Componentwise <=; a partial order, deliberately not __le__."""
        return self.cpu <= other.cpu and self.mem <= other.mem

    def is_zero(self) -> bool:
        return self.cpu == 0 and self.mem == 0

    def as_tuple(self) -> tuple[int, int]:
        return (self.cpu, self.mem)


def angle_key(r: ResourceVec) -> Fraction | float:
    """Key ordering resource vectors by their load angle arctan(cpu/mem).

    ``mem == 0`` sorts as the maximal angle.  Undefined for the zero vector;
    callers must exclude zero-load entities.
    """
    if r.cpu == 0 and r.mem == 0:
        raise ValueError("load angle is undefined for the zero vector")
    if r.mem == 0:
        return math.inf
    return Fraction(r.cpu, r.mem)


def angle_cmp(a_cpu: int, a_mem: int, b_cpu: int, b_mem: int) -> int:
    """Exact three-way angle comparison via integer cross products.

    Returns -1/0/1 as angle(a) is below/equal/above angle(b).  Both vectors
    must be non-zero.
    """
    lhs = a_cpu * b_mem
    rhs = b_cpu * a_mem
    return (lhs > rhs) - (lhs < rhs)


@dataclass(frozen=True)
class Flavor:
    """A predefined (cpu, mem) demand class shared by many VMs."""

    id: int
    demand: ResourceVec

    def __post_init__(self) -> None:
        if self.demand.cpu < 1 or self.demand.mem < 1:
            raise ValueError(f"flavor {self.id} demand must be strictly positive in both resources")


@dataclass(frozen=True)
class Host:
    id: int
    capacity: ResourceVec

    def __post_init__(self) -> None:
        if self.capacity.cpu < 1 or self.capacity.mem < 1:
            raise ValueError(f"host {self.id} capacity must be at least 1 in both resources")


@dataclass(frozen=True)
class VM:
    """A VM's demand is exactly its flavor's demand."""

    id: int
    flavor: int


@dataclass(frozen=True)
class ObjectiveWeights:
    """Weights of the linear objective w_a * active_hosts + w_m * migrated_mem.

    The ratio w_a / w_m is the migration budget that breaks even with
    releasing one host (``mph``, in memory units).  ``mph == inf`` is the pure
    bin-packing mode, represented as (w_a, w_m) = (1, 0): migrated memory is
    still tracked but never blocks acceptance.
    """

    w_a: int | Fraction
    w_m: int | Fraction

    def __post_init__(self) -> None:
        if self.w_a < 0 or self.w_m < 0:
            raise ValueError("objective weights must be non-negative")
        if self.w_a == 0 and self.w_m == 0:
            raise ValueError("objective weights must not both be zero")

    @classmethod
    def from_mph(cls, mph: int | Fraction | float) -> "ObjectiveWeights":
        """Build weights from a migration-per-host budget in memory units."""
        if mph == math.inf:
            return cls(1, 0)
        value = Fraction(mph)
        if value < 0:
            raise ValueError("mph must be non-negative")
        w_a: int | Fraction = int(value) if value.denominator == 1 else value
        return cls(w_a, 1)

    @property
    def mph(self) -> Fraction | float:
        if self.w_m == 0:
            return math.inf
        return Fraction(self.w_a) / Fraction(self.w_m)

    @property
    def bin_packing(self) -> bool:
        return self.w_m == 0


class Instance:
    """An immutable consolidation problem: hosts, flavors, VMs and the
    initial feasible mapping."""

    __slots__ = (
        "hosts",
        "flavors",
        "vms",
        "_initial",
        "_vm_cpu",
        "_vm_mem",
        "_cap_cpu",
        "_cap_mem",
        "_size_num",
        "_size_den",
    )

    def __init__(
        self,
        hosts: Sequence[Host],
        flavors: Sequence[Flavor],
        vms: Sequence[VM],
        initial_hosts: Sequence[int],
    ) -> None:
        self.hosts = tuple(hosts)
        self.flavors = tuple(flavors)
        self.vms = tuple(vms)
        for i, h in enumerate(self.hosts):
            if h.id != i:
                raise InstanceFormatError(f"hosts[{i}].id must be {i}, got {h.id}")
        for i, f in enumerate(self.flavors):
            if f.id != i:
                raise InstanceFormatError(f"flavors[{i}].id must be {i}, got {f.id}")
        for i, v in enumerate(self.vms):
            if v.id != i:
                raise InstanceFormatError(f"vms[{i}].id must be {i}, got {v.id}")
            if not 0 <= v.flavor < len(self.flavors):
                raise InstanceFormatError(f"vms[{i}].flavor: unknown flavor id {v.flavor}")
        if len(initial_hosts) != len(self.vms):
            raise InstanceFormatError(
                f"initial mapping covers {len(initial_hosts)} VMs, expected {len(self.vms)}"
            )
        self._vm_cpu = tuple(self.flavors[v.flavor].demand.cpu for v in self.vms)
        self._vm_mem = tuple(self.flavors[v.flavor].demand.mem for v in self.vms)
        self._cap_cpu = tuple(h.capacity.cpu for h in self.hosts)
        self._cap_mem = tuple(h.capacity.mem for h in self.hosts)

        initial = tuple(initial_hosts)
        load_c = [0] * len(self.hosts)
        load_m = [0] * len(self.hosts)
        for v, h in enumerate(initial):
            if not (type(h) is int and 0 <= h < len(self.hosts)):
                raise InstanceFormatError(f"vms[{v}].host: unknown host id {h!r}")
            load_c[h] += self._vm_cpu[v]
            load_m[h] += self._vm_mem[v]
        for h in range(len(self.hosts)):
            if load_c[h] > self._cap_cpu[h]:
                raise InfeasibleInstanceError(
                    f"initial mapping overloads host {h} in cpu ({load_c[h]} > {self._cap_cpu[h]})"
                )
            if load_m[h] > self._cap_mem[h]:
                raise InfeasibleInstanceError(
                    f"initial mapping overloads host {h} in mem ({load_m[h]} > {self._cap_mem[h]})"
                )
        self._initial = initial

        # Relative VM sizes share the denominator total_cpu * total_mem, so
        # ordering reduces to integer comparison of the numerators.
        tot_cpu = sum(self._vm_cpu)
        tot_mem = sum(self._vm_mem)
        if tot_cpu > 0 and tot_mem > 0:
            self._size_den = tot_cpu * tot_mem
            self._size_num = tuple(
                self._vm_cpu[v] * tot_mem + self._vm_mem[v] * tot_cpu for v in range(len(self.vms))
            )
        else:
            self._size_den = 0
            self._size_num = ()

    def initial_mapping(self) -> "Mapping":
        """A fresh mutable copy of the initial mapping."""
        return Mapping(self, self._initial)

    def initial_host(self, v: int) -> int:
        return self._initial[v]

    def demand(self, v: int) -> ResourceVec:
        return ResourceVec(self._vm_cpu[v], self._vm_mem[v])

    def vm_cpu(self, v: int) -> int:
        return self._vm_cpu[v]

    def vm_mem(self, v: int) -> int:
        return self._vm_mem[v]

    def capacity(self, h: int) -> ResourceVec:
        return ResourceVec(self._cap_cpu[h], self._cap_mem[h])

    def size_num(self, v: int) -> int:
        if self._size_den == 0:
            raise ValueError("VM sizes are undefined: instance has no VM load")
        return self._size_num[v]

    @property
    def size_den(self) -> int:
        if self._size_den == 0:
            raise ValueError("VM sizes are undefined: instance has no VM load")
        return self._size_den

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Instance):
            return NotImplemented
        return (
            self.hosts == other.hosts
            and self.flavors == other.flavors
            and self.vms == other.vms
            and self._initial == other._initial
        )

    def __hash__(self) -> int:
        return hash((self.hosts, self.flavors, self.vms, self._initial))

    def __repr__(self) -> str:
        return (
            f"Instance(hosts={len(self.hosts)}, flavors={len(self.flavors)}, "
            f"vms={len(self.vms)})"
        )


class Mapping:
    """A possibly partial assignment of VMs to hosts with cached per-host
    loads and member sets.

    Unassigned VMs are the ones sitting in whatever stash the caller holds.
    A mapping is feasible iff it is total and every host load stays within
    capacity in both dimensions.
    """

    __slots__ = ("inst", "_host_of", "_load_c", "_load_m", "_members")

    def __init__(self, inst: Instance, assignment: Sequence[int | None]) -> None:
        n_hosts = len(inst.hosts)
        if len(assignment) != len(inst.vms):
            raise ValueError("assignment length does not match the VM count")
        self.inst = inst
        self._host_of: list[int | None] = list(assignment)
        self._load_c = [0] * n_hosts
        self._load_m = [0] * n_hosts
        self._members: list[set[int]] = [set() for _ in range(n_hosts)]
        for v, h in enumerate(self._host_of):
            if h is None:
                continue
            if not 0 <= h < n_hosts:
                raise ValueError(f"vm {v} mapped to unknown host {h}")
            self._load_c[h] += inst.vm_cpu(v)
            self._load_m[h] += inst.vm_mem(v)
            self._members[h].add(v)

    def copy(self) -> "Mapping":
        dup = object.__new__(Mapping)
        dup.inst = self.inst
        dup._host_of = self._host_of.copy()
        dup._load_c = self._load_c.copy()
        dup._load_m = self._load_m.copy()
        dup._members = [s.copy() for s in self._members]
        return dup

    @property
    def assignment(self) -> tuple[int | None, ...]:
        return tuple(self._host_of)

    def host_of(self, v: int) -> int | None:
        return self._host_of[v]

    def assign(self, v: int, h: int) -> None:
        if self._host_of[v] is not None:
            raise ValueError(f"vm {v} is already assigned")
        self._host_of[v] = h
        self._load_c[h] += self.inst.vm_cpu(v)
        self._load_m[h] += self.inst.vm_mem(v)
        self._members[h].add(v)

    def unassign(self, v: int) -> int:
        h = self._host_of[v]
        if h is None:
            raise ValueError(f"vm {v} is not assigned")
        self._host_of[v] = None
        self._load_c[h] -= self.inst.vm_cpu(v)
        self._load_m[h] -= self.inst.vm_mem(v)
        self._members[h].discard(v)
        return h

    def load(self, h: int) -> ResourceVec:
        return ResourceVec(self._load_c[h], self._load_m[h])

    def load_parts(self, h: int) -> tuple[int, int]:
        return (self._load_c[h], self._load_m[h])

    def free(self, h: int) -> ResourceVec:
        fc, fm = self.free_parts(h)
        return ResourceVec(fc, fm)

    def free_parts(self, h: int) -> tuple[int, int]:
        fc = self.inst._cap_cpu[h] - self._load_c[h]
        fm = self.inst._cap_mem[h] - self._load_m[h]
        if fc < 0 or fm < 0:
            raise RuntimeError(
                f"host {h} is overloaded (load {self._load_c[h]},{self._load_m[h]} "
                f"exceeds capacity); mapping state is corrupt"
            )
        return (fc, fm)

    def fits(self, v: int, h: int) -> bool:
        fc, fm = self.free_parts(h)
        return self.inst.vm_cpu(v) <= fc and self.inst.vm_mem(v) <= fm

    def members(self, h: int) -> set[int]:
        return self._members[h]

    def vms_on(self, h: int) -> tuple[int, ...]:
        return tuple(sorted(self._members[h]))

    def active_hosts(self) -> list[int]:
        return [h for h in range(len(self.inst.hosts)) if self._members[h]]

    def active_count(self) -> int:
        return sum(1 for m in self._members if m)

    def unassigned_vms(self) -> list[int]:
        return [v for v, h in enumerate(self._host_of) if h is None]

    def is_total(self) -> bool:
        return all(h is not None for h in self._host_of)

    def is_feasible(self) -> bool:
        if not self.is_total():
            return False
        return all(
            self._load_c[h] <= self.inst._cap_cpu[h] and self._load_m[h] <= self.inst._cap_mem[h]
            for h in range(len(self.inst.hosts))
        )

    def caches_consistent(self) -> bool:
        """Recompute all caches from scratch and compare (test hook)."""
        rebuilt = Mapping(self.inst, self._host_of)
        return (
            rebuilt._load_c == self._load_c
            and rebuilt._load_m == self._load_m
            and rebuilt._members == self._members
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Mapping):
            return NotImplemented
        return self.inst == other.inst and self._host_of == other._host_of

    def __hash__(self) -> int:
        return hash((self.inst, tuple(self._host_of)))

    def __repr__(self) -> str:
        return f"Mapping({self._host_of!r})"


# Operations mirroring the mapping methods, for callers that prefer the
# functional spelling.


def load(h: int, mu: Mapping) -> ResourceVec:
    return mu.load(h)


def free(h: int, mu: Mapping) -> ResourceVec:
    return mu.free(h)


def fits(v: int, h: int, mu: Mapping) -> bool:
    return mu.fits(v, h)


def active_hosts(mu: Mapping) -> list[int]:
    return mu.active_hosts()


def migrated_memory(mu: Mapping, mu0: Mapping) -> int:
    """Total memory of VMs whose host differs from the initial mapping."""
    if not mu.is_total():
        raise ValueError("migrated memory requires a total mapping")
    inst = mu.inst
    return sum(
        inst.vm_mem(v)
        for v in range(len(inst.vms))
        if mu._host_of[v] != mu0._host_of[v]
    )


def objective(mu: Mapping, mu0: Mapping, weights: ObjectiveWeights):
    """w_a * active_hosts + w_m * migrated_memory; +inf for partial mappings."""
    if not mu.is_total():
        return math.inf
    base = weights.w_a * mu.active_count()
    if weights.w_m == 0:
        return base
    return base + weights.w_m * migrated_memory(mu, mu0)


def host_migration_cost(h: int, mu: Mapping, mu0: Mapping) -> int:
    """Memory of the VMs on h that still sit on their original host."""
    inst = mu.inst
    return sum(inst.vm_mem(v) for v in mu.members(h) if mu0._host_of[v] == h)


def vm_size(v: int, inst: Instance) -> Fraction:
    """Relative VM size: v.cpu / total_cpu + v.mem / total_mem."""
    return Fraction(inst.size_num(v), inst.size_den)


def surrogate_load(h: int, mu: Mapping) -> Fraction:
    """Sum of the per-resource load fractions of a host."""
    lc, lm = mu.load_parts(h)
    inst = mu.inst
    return Fraction(lc, inst._cap_cpu[h]) + Fraction(lm, inst._cap_mem[h])


# On-disk instance schema:
#   {"hosts":   [{"id":0,"cpu":6,"mem":6}, ...],
#    "flavors": [{"id":0,"cpu":3,"mem":3}, ...],
#    "vms":     [{"id":0,"flavor":0,"host":0}, ...]}
# The "host" field of each VM defines the initial mapping.


def _require_int(obj: dict, key: str, where: str) -> int:
    if key not in obj:
        raise InstanceFormatError(f"{where}: missing field {key!r}")
    value = obj[key]
    if type(value) is not int:
        raise InstanceFormatError(f"{where}.{key}: expected an integer, got {value!r}")
    return value


def instance_from_dict(doc: dict) -> Instance:
    if not isinstance(doc, dict):
        raise InstanceFormatError("instance document must be a JSON object")
    for key in ("hosts", "flavors", "vms"):
        if key not in doc:
            raise InstanceFormatError(f"missing top-level field {key!r}")
        if not isinstance(doc[key], list):
            raise InstanceFormatError(f"{key}: expected a list")
    hosts = []
    for i, entry in enumerate(doc["hosts"]):
        where = f"hosts[{i}]"
        hid = _require_int(entry, "id", where)
        cap = ResourceVec(_require_int(entry, "cpu", where), _require_int(entry, "mem", where))
        try:
            hosts.append(Host(hid, cap))
        except ValueError as exc:
            raise InstanceFormatError(f"{where}: {exc}") from exc
    flavors = []
    for i, entry in enumerate(doc["flavors"]):
        where = f"flavors[{i}]"
        fid = _require_int(entry, "id", where)
        dem = ResourceVec(_require_int(entry, "cpu", where), _require_int(entry, "mem", where))
        try:
            flavors.append(Flavor(fid, dem))
        except ValueError as exc:
            raise InstanceFormatError(f"{where}: {exc}") from exc
    vms = []
    initial = []
    for i, entry in enumerate(doc["vms"]):
        where = f"vms[{i}]"
        vid = _require_int(entry, "id", where)
        vms.append(VM(vid, _require_int(entry, "flavor", where)))
        initial.append(_require_int(entry, "host", where))
    return Instance(hosts, flavors, vms, initial)


def instance_to_dict(inst: Instance) -> dict:
    return {
        "hosts": [{"id": h.id, "cpu": h.capacity.cpu, "mem": h.capacity.mem} for h in inst.hosts],
        "flavors": [
            {"id": f.id, "cpu": f.demand.cpu, "mem": f.demand.mem} for f in inst.flavors
        ],
        "vms": [
            {"id": v.id, "flavor": v.flavor, "host": inst.initial_host(v.id)} for v in inst.vms
        ],
    }


def load_instance(path: str | Path) -> Instance:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InstanceFormatError(f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return instance_from_dict(doc)


def save_instance(inst: Instance, path: str | Path) -> None:
    Path(path).write_text(json.dumps(instance_to_dict(inst), indent=1) + "\n")


def instance_with_mapping(inst: Instance, mu: Mapping) -> Instance:
    """A new instance whose initial mapping is ``mu`` (used to emit results)."""
    if not mu.is_total():
        raise ValueError("cannot serialize a partial mapping")
    return Instance(inst.hosts, inst.flavors, inst.vms, [mu.host_of(v) for v in range(len(inst.vms))])

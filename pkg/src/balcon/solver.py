"""The BalCon consolidation heuristic.

BalCon tries to release hosts one by one, cheapest migration cost first.  The
VMs of the host under release go into a stash; ForceFit drains the stash by
direct Best Fit placements when possible and by Force Steps otherwise.  A
Force Step picks a destination host according to the cluster state (Balanced
or Lopsided) and evicts some of its residents back into the stash to make
room.  A release is kept only when the resulting mapping is feasible and does
not increase the objective.
"""
from __future__ import annotations

import time
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence

from .classify import DEFAULT_ALPHA, ClusterClass, Stash, classify
from .model import (
    Instance,
    Mapping,
    ObjectiveWeights,
    host_migration_cost,
    migrated_memory,
    objective,
)

__all__ = [
    "SolverParams",
    "RepeatsProhibitor",
    "ResourceToggle",
    "ReleaseAttempt",
    "RunReport",
    "ForceFitResult",
    "balcon",
    "force_fit",
    "best_fit",
    "choose_host_balanced",
    "choose_host_lopsided",
    "force_fit_balanced",
    "force_fit_lopsided",
    "prohibitor_filter",
    "DEFAULT_FORCE_STEP_LIMIT",
    "DEFAULT_REPEAT_LIMIT",
]

DEFAULT_FORCE_STEP_LIMIT = 4000
DEFAULT_REPEAT_LIMIT = 3

TraceSink = Optional[Callable[[dict], None]]


@dataclass(frozen=True)
class SolverParams:
    """Run parameters: objective weights, the balanced/lopsided threshold
    alpha, the Force Step budget per release attempt, and the repeat limit
    for consecutive destination choices."""

    weights: ObjectiveWeights
    alpha: Fraction = DEFAULT_ALPHA
    force_step_limit: int = DEFAULT_FORCE_STEP_LIMIT
    repeat_limit: int = DEFAULT_REPEAT_LIMIT

    def __post_init__(self) -> None:
        if not 0 <= self.alpha <= 1:
            raise ValueError("alpha must lie in [0, 1]")
        if self.force_step_limit < 0:
            raise ValueError("force_step_limit must be non-negative")
        if self.repeat_limit < 1:
            raise ValueError("repeat_limit must be at least 1")


class RepeatsProhibitor:
    """Blocks a host from being chosen more than ``limit`` times in a row."""

    __slots__ = ("limit", "last", "count")

    def __init__(self, limit: int = DEFAULT_REPEAT_LIMIT) -> None:
        self.limit = limit
        self.last: int | None = None
        self.count = 0

    def filter(self, candidates: Sequence[int]) -> list[int]:
        if self.last is not None and self.count >= self.limit:
            return [h for h in candidates if h != self.last]
        return list(candidates)

    def record(self, h: int) -> None:
        if h == self.last:
            self.count += 1
        else:
            self.last = h
            self.count = 1


def prohibitor_filter(p: RepeatsProhibitor, candidates: Sequence[int]) -> list[int]:
    return p.filter(candidates)


class ResourceToggle:
    """The mutable resource selector used by the Lopsided heuristic."""

    __slots__ = ("r",)

    def __init__(self, r: str = "cpu") -> None:
        if r not in ("cpu", "mem"):
            raise ValueError("resource must be 'cpu' or 'mem'")
        self.r = r

    def flip(self) -> str:
        self.r = "mem" if self.r == "cpu" else "cpu"
        return self.r


@dataclass
class ForceFitResult:
    force_steps: int
    class_counts: dict[str, int]
    completed: bool
    reason: str | None = None


@dataclass
class ReleaseAttempt:
    host: int
    accepted: bool
    released: bool
    force_steps: int
    class_counts: dict[str, int]
    objective_after: object
    migrated_after: int


@dataclass
class RunReport:
    algorithm: str
    mapping: Mapping
    active_hosts: int
    migrated_mem: int
    objective: object
    force_steps: int
    attempts: list[ReleaseAttempt] = field(default_factory=list)
    wall_time: float = 0.0


def _capacity_candidates(v: int, hosts: Sequence[int], inst: Instance) -> list[int]:
    # Hosts that could hold v even when empty; anything else can never work.
    vc = inst._vm_cpu[v]
    vm = inst._vm_mem[v]
    cap_c = inst._cap_cpu
    cap_m = inst._cap_mem
    return [h for h in hosts if vc <= cap_c[h] and vm <= cap_m[h]]


def _cross(a_cpu: int, a_mem: int, b_cpu: int, b_mem: int) -> int:
    # sign(angle(a) - angle(b)) for non-zero vectors
    return a_cpu * b_mem - b_cpu * a_mem


def _surrogate_gt(mu: Mapping, a: int, b: int) -> bool:
    # surrogate_load(a) > surrogate_load(b) via integer cross multiplication
    inst = mu.inst
    num_a = mu._load_c[a] * inst._cap_mem[a] + mu._load_m[a] * inst._cap_cpu[a]
    num_b = mu._load_c[b] * inst._cap_mem[b] + mu._load_m[b] * inst._cap_cpu[b]
    return num_a * (inst._cap_cpu[b] * inst._cap_mem[b]) > num_b * (
        inst._cap_cpu[a] * inst._cap_mem[a]
    )


def best_fit(v: int, hosts: Sequence[int], mu: Mapping) -> int:
    """Assign v to the fitting host with the highest surrogate load
    (ties to the lower host id) and return the chosen host."""
    inst = mu.inst
    vc, vm = inst.vm_cpu(v), inst.vm_mem(v)
    choice = None
    for h in hosts:
        if inst._cap_cpu[h] - mu._load_c[h] < vc or inst._cap_mem[h] - mu._load_m[h] < vm:
            continue
        if choice is None or _surrogate_gt(mu, h, choice):
            choice = h
    if choice is None:
        raise RuntimeError(f"best_fit called but vm {v} fits no host")
    mu.assign(v, choice)
    return choice


def choose_host_balanced(
    v: int, hosts: Sequence[int], mu: Mapping, prohibitor: RepeatsProhibitor
) -> int | None:
    """Destination with the most residents strictly smaller than v.

    Ties go to the higher surrogate load, then the lower host id.  Returns
    None when no host could hold v at all.
    """
    inst = mu.inst
    candidates = _capacity_candidates(v, hosts, inst)
    if not candidates:
        return None
    allowed = prohibitor.filter(candidates) or candidates
    target = inst.size_num(v)
    sizes = inst._size_num
    choice = None
    best_count = -1
    for h in allowed:
        count = sum(1 for w in mu._members[h] if sizes[w] < target)
        if count > best_count or (count == best_count and _surrogate_gt(mu, h, choice)):
            choice = h
            best_count = count
    prohibitor.record(choice)
    return choice


def _larger_load_resource(h: int, mu: Mapping) -> str:
    lc, lm = mu.load_parts(h)
    inst = mu.inst
    # compare lc/cap_c vs lm/cap_m by cross multiplication; tie -> cpu
    if lc * inst._cap_mem[h] >= lm * inst._cap_cpu[h]:
        return "cpu"
    return "mem"


def choose_host_lopsided(
    v: int,
    hosts: Sequence[int],
    mu: Mapping,
    prohibitor: RepeatsProhibitor,
    toggle: ResourceToggle,
) -> int | None:
    """Destination choice for the Lopsided state.

    When v's angle is extremal among the candidates' load angles, take the
    host with the most opposite angle and point the toggle at that host's
    larger load fraction.  Otherwise flip the toggle and take the host with
    the largest load in that resource.  Ties go to the lower host id.
    """
    inst = mu.inst
    candidates = _capacity_candidates(v, hosts, inst)
    if not candidates:
        return None
    allowed = prohibitor.filter(candidates) or candidates
    vc, vm = inst.vm_cpu(v), inst.vm_mem(v)
    load_c = mu._load_c
    load_m = mu._load_m

    # One pass over the loaded candidates: extremal tests for v's angle and
    # the min/max-angle hosts (ties to the lower id via the ascending scan).
    v_ge_all = True
    v_le_all = True
    min_h = max_h = -1
    min_lc = min_lm = max_lc = max_lm = 0
    seen_loaded = False
    for h in allowed:
        lc, lm = load_c[h], load_m[h]
        if lc == 0 and lm == 0:
            continue
        side = vc * lm - lc * vm
        if side < 0:
            v_ge_all = False
        if side > 0:
            v_le_all = False
        if not seen_loaded:
            seen_loaded = True
            min_h = max_h = h
            min_lc, min_lm, max_lc, max_lm = lc, lm, lc, lm
            continue
        if lc * min_lm < min_lc * lm:
            min_h, min_lc, min_lm = h, lc, lm
        if lc * max_lm > max_lc * lm:
            max_h, max_lc, max_lm = h, lc, lm

    choice: int | None = None
    if seen_loaded:
        if v_ge_all:
            choice = min_h
            toggle.r = _larger_load_resource(choice, mu)
        elif v_le_all:
            choice = max_h
            toggle.r = _larger_load_resource(choice, mu)
    if choice is None:
        toggle.flip()
        loads = load_c if toggle.r == "cpu" else load_m
        choice = allowed[0]
        for h in allowed[1:]:
            if loads[h] > loads[choice]:
                choice = h
    prohibitor.record(choice)
    return choice


def _evict_place_readd(v: int, h: int, mu: Mapping, order: list[int]) -> list[int]:
    """Shared Force Step mechanics: exclude residents in ``order`` until v
    fits, place v, then re-add excluded residents in reverse order when they
    fit.  Returns the residents that stayed out."""
    inst = mu.inst
    if inst.vm_cpu(v) > inst._cap_cpu[h] or inst.vm_mem(v) > inst._cap_mem[h]:
        raise RuntimeError(f"vm {v} cannot fit host {h} even when empty")
    excluded: list[int] = []
    for w in order:
        if mu.fits(v, h):
            break
        mu.unassign(w)
        excluded.append(w)
    mu.assign(v, h)
    evicted: list[int] = []
    for w in reversed(excluded):
        if mu.fits(w, h):
            mu.assign(w, h)
        else:
            evicted.append(w)
    return evicted


def force_fit_balanced(v: int, h: int, mu: Mapping) -> list[int]:
    """Eviction order: residents migrated to h first, then smaller memory,
    then lower id."""
    inst = mu.inst
    order = sorted(
        mu.members(h),
        key=lambda w: (inst.initial_host(w) == h, inst.vm_mem(w), w),
    )
    return _evict_place_readd(v, h, mu, order)


def force_fit_lopsided(v: int, h: int, mu: Mapping) -> list[int]:
    """Like the balanced eviction but preferring residents on the same
    angular side of v as the destination host."""
    inst = mu.inst
    vc, vm = inst.vm_cpu(v), inst.vm_mem(v)
    lc, lm = mu.load_parts(h)
    host_below = _cross(lc, lm, vc, vm) < 0

    def sort_key(w: int):
        side = _cross(inst.vm_cpu(w), inst.vm_mem(w), vc, vm)
        in_zone = side < 0 if host_below else side > 0
        return (not in_zone, inst.initial_host(w) == h, inst.vm_mem(w), w)

    order = sorted(mu.members(h), key=sort_key)
    return _evict_place_readd(v, h, mu, order)


def force_fit(
    stash: Stash,
    hosts: Sequence[int],
    mu: Mapping,
    params: SolverParams,
    trace: TraceSink = None,
) -> ForceFitResult:
    """Drain the stash into ``hosts``, mutating ``mu``.

    Direct placements are free; Balanced/Lopsided placements consume Force
    Steps up to the budget.  On budget exhaustion, or when some VM fits no
    host even empty, the stash is left non-empty and the mapping stays
    partial, which the caller rejects.
    """
    steps = 0
    counts: Counter[str] = Counter()
    prohibitor = RepeatsProhibitor(params.repeat_limit)
    toggle = ResourceToggle("cpu")
    while stash:
        v = stash.peek()
        cls = classify(stash, hosts, mu, v, params.alpha)
        counts[cls.value] += 1
        if cls is ClusterClass.AMPLE:
            stash.pop()
            dest = best_fit(v, hosts, mu)
            if trace is not None:
                trace({"event": "place", "class": cls.value, "vm": v, "host": dest})
            continue
        if steps >= params.force_step_limit:
            return ForceFitResult(steps, dict(counts), False, "force-step budget exhausted")
        if cls is ClusterClass.BALANCED:
            dest = choose_host_balanced(v, hosts, mu, prohibitor)
        else:
            dest = choose_host_lopsided(v, hosts, mu, prohibitor, toggle)
        if dest is None:
            # no host can hold v even when empty; the attempt cannot succeed
            return ForceFitResult(steps, dict(counts), False, f"vm {v} fits no destination")
        steps += 1
        stash.pop()
        if cls is ClusterClass.BALANCED:
            evicted = force_fit_balanced(v, dest, mu)
        else:
            evicted = force_fit_lopsided(v, dest, mu)
        stash.extend(evicted)
        if trace is not None:
            trace(
                {
                    "event": "force_step",
                    "class": cls.value,
                    "vm": v,
                    "host": dest,
                    "evicted": list(evicted),
                }
            )
    return ForceFitResult(steps, dict(counts), True, None)


def balcon(
    inst: Instance,
    params: SolverParams,
    trace: TraceSink = None,
    algorithm: str = "balcon",
) -> tuple[Mapping, RunReport]:
    """Run the consolidation heuristic and return the best mapping found.

    Hosts are attempted once each, in ascending order of their initial
    migration cost.  The worst case returns the initial mapping unchanged.
    """
    start = time.perf_counter()
    mu0 = inst.initial_mapping()
    mu_best = inst.initial_mapping()
    weights = params.weights
    best_obj = objective(mu_best, mu0, weights)
    best_mig = 0
    order = sorted(range(len(inst.hosts)), key=lambda h: (host_migration_cost(h, mu0, mu0), h))
    attempts: list[ReleaseAttempt] = []
    total_steps = 0
    for h in order:
        mu_tmp = mu_best.copy()
        stashed = mu_tmp.vms_on(h)
        for v in stashed:
            mu_tmp.unassign(v)
        active = mu_tmp.active_hosts()
        if trace is not None:
            trace({"event": "release_attempt", "host": h, "stash": list(stashed)})
        result = force_fit(Stash(inst, stashed), active, mu_tmp, params, trace)
        total_steps += result.force_steps
        accepted = False
        released = False
        if result.completed and mu_tmp.is_feasible():
            cand_obj = objective(mu_tmp, mu0, weights)
            if cand_obj <= best_obj:
                cand_mig = migrated_memory(mu_tmp, mu0)
                if weights.w_m > 0:
                    # accepted steps never spend more than mph new memory
                    assert (cand_mig - best_mig) * weights.w_m <= weights.w_a, (
                        "accepted release exceeded the per-host migration budget"
                    )
                accepted = True
                released = bool(stashed)
                mu_best = mu_tmp
                best_obj = cand_obj
                best_mig = cand_mig
        attempts.append(
            ReleaseAttempt(
                host=h,
                accepted=accepted,
                released=released,
                force_steps=result.force_steps,
                class_counts=result.class_counts,
                objective_after=best_obj,
                migrated_after=best_mig,
            )
        )
        if trace is not None:
            trace({"event": "release_result", "host": h, "accepted": accepted})
    report = RunReport(
        algorithm=algorithm,
        mapping=mu_best,
        active_hosts=mu_best.active_count(),
        migrated_mem=best_mig,
        objective=best_obj,
        force_steps=total_steps,
        attempts=attempts,
        wall_time=time.perf_counter() - start,
    )
    return mu_best, report

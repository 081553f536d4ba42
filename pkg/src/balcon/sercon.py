"""Sercon-style baselines: free-space-only consolidation without Force Steps.

``sercon_modified`` is exactly the main heuristic with a zero Force Step
budget: one pass over the hosts, each VM of a released host placed by Best
Fit into existing free space, acceptance by the same objective test.

``sercon_original`` reconstructs the older multi-pass scheme: it sweeps the
active hosts repeatedly until a pass releases nothing (or a pass budget of
|H| passes is hit), commits a release only when every VM of the host found a
placement, and additionally honors a total migration budget.  The exact rule
set of the historical heuristic is not published in a reusable form, so this
variant is an approximation and is kept out of the fidelity gates.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, replace
from fractions import Fraction

from .model import (
    Instance,
    Mapping,
    host_migration_cost,
    migrated_memory,
    objective,
    surrogate_load,
)
from .solver import ReleaseAttempt, RunReport, SolverParams, balcon

__all__ = ["SerconOriginalParams", "sercon_modified", "sercon_original"]


@dataclass(frozen=True)
class SerconOriginalParams:
    """max_total_migrations: overall cap on VMs moved (None = unlimited).
    min_migration_efficiency: abandon a release attempt once fewer than
    ceil(efficiency * |VMs|) placements remain possible."""

    max_total_migrations: int | None = None
    min_migration_efficiency: Fraction = Fraction(0)

    def __post_init__(self) -> None:
        if self.max_total_migrations is not None and self.max_total_migrations < 0:
            raise ValueError("max_total_migrations must be non-negative")
        if not 0 <= self.min_migration_efficiency <= 1:
            raise ValueError("min_migration_efficiency must lie in [0, 1]")


def sercon_modified(inst: Instance, params: SolverParams) -> tuple[Mapping, RunReport]:
    """The main heuristic with the Force Step budget forced to zero."""
    mu, report = balcon(
        inst, replace(params, force_step_limit=0), algorithm="sercon-mod"
    )
    return mu, report


def sercon_original(
    inst: Instance,
    params: SolverParams,
    original: SerconOriginalParams = SerconOriginalParams(),
) -> tuple[Mapping, RunReport]:
    start = time.perf_counter()
    mu0 = inst.initial_mapping()
    mu_best = inst.initial_mapping()
    weights = params.weights
    best_obj = objective(mu_best, mu0, weights)
    best_mig = 0
    migrations_used = 0
    attempts: list[ReleaseAttempt] = []
    n_hosts = len(inst.hosts)
    for _ in range(n_hosts):
        released_any = False
        order = sorted(
            mu_best.active_hosts(),
            key=lambda h: (host_migration_cost(h, mu_best, mu0), h),
        )
        for h in order:
            mu_tmp = mu_best.copy()
            vms = mu_tmp.vms_on(h)
            if not vms:
                continue
            for v in vms:
                mu_tmp.unassign(v)
            destinations = mu_tmp.active_hosts()
            total = len(vms)
            needed = math.ceil(original.min_migration_efficiency * total)
            placed = 0
            for i, v in enumerate(
                sorted(vms, key=lambda x: (-inst.size_num(x), x))
            ):
                fitting = [d for d in destinations if mu_tmp.fits(v, d)]
                if not fitting:
                    # remaining VMs cannot lift the count to a full release
                    remaining = total - i - 1
                    if placed + remaining < max(needed, total):
                        break
                    continue
                dest = max(fitting, key=lambda d: (surrogate_load(d, mu_tmp), -d))
                mu_tmp.assign(v, dest)
                placed += 1
            accepted = False
            if placed == total:
                budget_ok = (
                    original.max_total_migrations is None
                    or migrations_used + total <= original.max_total_migrations
                )
                cand_obj = objective(mu_tmp, mu0, weights)
                if budget_ok and cand_obj <= best_obj:
                    accepted = True
                    released_any = True
                    migrations_used += total
                    mu_best = mu_tmp
                    best_obj = cand_obj
                    best_mig = migrated_memory(mu_best, mu0)
            attempts.append(
                ReleaseAttempt(
                    host=h,
                    accepted=accepted,
                    released=accepted,
                    force_steps=0,
                    class_counts={},
                    objective_after=best_obj,
                    migrated_after=best_mig,
                )
            )
        if not released_any:
            break
    report = RunReport(
        algorithm="sercon-orig",
        mapping=mu_best,
        active_hosts=mu_best.active_count(),
        migrated_mem=best_mig,
        objective=best_obj,
        force_steps=0,
        attempts=attempts,
        wall_time=time.perf_counter() - start,
    )
    return mu_best, report

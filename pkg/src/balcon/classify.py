"""Balance-factor computation and the three-way cluster-state classification.

The balance factor measures how much of the cluster's pooled free space is
usable under the current per-host distribution, in units of a reference
vector s (usually the aggregate demand of the stash):

    cap(s, H)  = sum_h min(free(h).cpu / s.cpu, free(h).mem / s.mem)
    pcap(s, H) = min(sum_h free(h).cpu / s.cpu, sum_h free(h).mem / s.mem)
    BF(s, H)   = cap / pcap                                    (in [0, 1])

All values are exact rationals; the classifier itself compares integer cross
products so classification is bit-exact.
"""
from __future__ import annotations

import heapq
from enum import Enum
from fractions import Fraction
from typing import Iterable, Sequence

from .model import Instance, Mapping, ResourceVec

__all__ = [
    "ClusterClass",
    "Stash",
    "DEFAULT_ALPHA",
    "capacity",
    "potential_capacity",
    "balance_factor",
    "classify",
]

DEFAULT_ALPHA = Fraction(19, 20)


class ClusterClass(Enum):
    AMPLE = "ample"
    BALANCED = "balanced"
    LOPSIDED = "lopsided"


class Stash:
    """VMs waiting for placement, ordered largest-first by relative size.

    Ties go to the lower VM id.  The aggregate demand vector of the members
    is maintained incrementally and always equals the recomputed sum.
    """

    __slots__ = ("inst", "_heap", "_cpu", "_mem")

    def __init__(self, inst: Instance, vm_ids: Iterable[int] = ()) -> None:
        self.inst = inst
        self._heap: list[tuple[int, int]] = []
        self._cpu = 0
        self._mem = 0
        self.extend(vm_ids)

    def push(self, v: int) -> None:
        heapq.heappush(self._heap, (-self.inst.size_num(v), v))
        self._cpu += self.inst.vm_cpu(v)
        self._mem += self.inst.vm_mem(v)

    def extend(self, vm_ids: Iterable[int]) -> None:
        for v in vm_ids:
            self.push(v)

    def peek(self) -> int:
        """Largest member, without removing it."""
        return self._heap[0][1]

    def pop(self) -> int:
        _, v = heapq.heappop(self._heap)
        self._cpu -= self.inst.vm_cpu(v)
        self._mem -= self.inst.vm_mem(v)
        return v

    @property
    def s(self) -> ResourceVec:
        return ResourceVec(self._cpu, self._mem)

    @property
    def cpu_total(self) -> int:
        return self._cpu

    @property
    def mem_total(self) -> int:
        return self._mem

    def vm_ids(self) -> list[int]:
        return sorted(v for _, v in self._heap)

    def __len__(self) -> int:
        return len(self._heap)

    def __bool__(self) -> bool:
        return bool(self._heap)


def _s_parts(s) -> tuple[Fraction, Fraction]:
    if isinstance(s, ResourceVec):
        s_cpu, s_mem = Fraction(s.cpu), Fraction(s.mem)
    else:
        s_cpu, s_mem = Fraction(s[0]), Fraction(s[1])
    if s_cpu < 0 or s_mem < 0:
        raise ValueError("reference vector must be non-negative")
    if s_cpu == 0 and s_mem == 0:
        raise ValueError("capacity is undefined for a zero reference vector")
    return s_cpu, s_mem


def _host_ratio(fc: int, fm: int, s_cpu: Fraction, s_mem: Fraction) -> Fraction:
    # A zero reference component contributes an infinite ratio, so the min
    # collapses onto the other resource.
    ratios = []
    if s_cpu > 0:
        ratios.append(Fraction(fc) / s_cpu)
    if s_mem > 0:
        ratios.append(Fraction(fm) / s_mem)
    return min(ratios)


def capacity(s, hosts: Sequence[int], mu: Mapping) -> Fraction:
    """How many copies of s fit into the hosts' free space, host by host."""
    s_cpu, s_mem = _s_parts(s)
    total = Fraction(0)
    for h in hosts:
        fc, fm = mu.free_parts(h)
        total += _host_ratio(fc, fm, s_cpu, s_mem)
    return total


def potential_capacity(s, hosts: Sequence[int], mu: Mapping) -> Fraction:
    """How many copies of s would fit if all free space were pooled."""
    s_cpu, s_mem = _s_parts(s)
    sum_c = 0
    sum_m = 0
    for h in hosts:
        fc, fm = mu.free_parts(h)
        sum_c += fc
        sum_m += fm
    return _host_ratio(sum_c, sum_m, s_cpu, s_mem)


def balance_factor(s, hosts: Sequence[int], mu: Mapping) -> Fraction:
    """cap / pcap, defined as 1 when there is no free space at all."""
    pcap = potential_capacity(s, hosts, mu)
    if pcap == 0:
        return Fraction(1)
    return capacity(s, hosts, mu) / pcap


def classify(
    stash: Stash,
    hosts: Sequence[int],
    mu: Mapping,
    v: int,
    alpha: Fraction = DEFAULT_ALPHA,
) -> ClusterClass:
    """Classify the cluster state for placing the stash's largest VM ``v``.

    ``v`` must still be in the stash: the reference vector is the aggregate
    stash demand including it.  Ample when some host fits v directly; else
    Lopsided when cap < 1 or cap < alpha * pcap; else Balanced.
    """
    inst = mu.inst
    cap_c = inst._cap_cpu
    cap_m = inst._cap_mem
    load_c = mu._load_c
    load_m = mu._load_m
    vc = inst.vm_cpu(v)
    vm = inst.vm_mem(v)
    s_cpu = stash.cpu_total
    s_mem = stash.mem_total
    if s_cpu > 0 and s_mem > 0:
        # cap and pcap share the denominator s_cpu * s_mem, so the two
        # Lopsided tests reduce to integer comparisons.
        cap_num = 0
        sum_c = 0
        sum_m = 0
        for h in hosts:
            fc = cap_c[h] - load_c[h]
            fm = cap_m[h] - load_m[h]
            if vc <= fc and vm <= fm:
                return ClusterClass.AMPLE
            cap_num += min(fc * s_mem, fm * s_cpu)
            sum_c += fc
            sum_m += fm
        den = s_cpu * s_mem
        pcap_num = min(sum_c * s_mem, sum_m * s_cpu)
        if cap_num < den:
            return ClusterClass.LOPSIDED
        if cap_num * alpha.denominator < alpha.numerator * pcap_num:
            return ClusterClass.LOPSIDED
        return ClusterClass.BALANCED
    for h in hosts:
        if vc <= cap_c[h] - load_c[h] and vm <= cap_m[h] - load_m[h]:
            return ClusterClass.AMPLE
    # Degenerate single-resource stash; exact rational fallback.
    s = (s_cpu, s_mem)
    cap = capacity(s, hosts, mu)
    if cap < 1 or cap < alpha * potential_capacity(s, hosts, mu):
        return ClusterClass.LOPSIDED
    return ClusterClass.BALANCED

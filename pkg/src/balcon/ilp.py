"""Integer-program exporters (CPLEX LP text format) and solution ingestion.

Three formulations are emitted for external MILP solvers:

* Allocation: binary alloc_v{i}_h{j}, active_h{j}, migr_v{i}; one assignment
  row per VM, two resource rows per host, one activation link per (vm, host)
  pair and one migration definition per VM.
* Flavor flow: integer in_f{i}_h{j} / out_f{i}_h{j} counting VMs of one
  flavor migrating in/out of a host, plus binary active_h{j}; per-flavor flow
  conservation, out-capacity and forced-evacuation rows, and resource rows
  gated by the activation variable.
* Relaxed flavor flow: the same rows with in/out continuous; its optimum is a
  lower bound on the other two.

Solutions come back as plain ``name value`` lines, one variable per line.
The objective is always recomputed from the variable values; the solver's
reported objective is never trusted.  Infinite migration budget is emitted as
zero migration weight plus a tiny tie-break epsilon (1e-6 per memory unit) so
that solvers prefer low-migration packings; the epsilon is excluded from
objective recomputation.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Sequence, TextIO

from .model import Instance, Mapping, ObjectiveWeights

__all__ = [
    "ModelKind",
    "EmitCounts",
    "SolutionError",
    "SolutionReport",
    "MIGRATION_TIEBREAK_EPSILON",
    "expected_counts",
    "initial_flavor_counts",
    "emit_allocation_model",
    "emit_flavor_flow_model",
    "emit_model",
    "read_solution",
    "lp_entity_counts",
    "lp_suffix",
]

MIGRATION_TIEBREAK_EPSILON = Fraction(1, 10**6)


class ModelKind(Enum):
    ALLOCATION = "alloc"
    FLAVOR_FLOW = "flow"
    RELAXED_FLAVOR_FLOW = "flowlb"


@dataclass(frozen=True)
class EmitCounts:
    variables: int
    constraints: int


class SolutionError(ValueError):
    """Malformed solver output or a constraint-violating solution."""


def lp_suffix(kind: ModelKind) -> str:
    return f".{kind.value}.lp"


def expected_counts(kind: ModelKind, n_vms: int, n_hosts: int, n_flavors: int) -> EmitCounts:
    if kind is ModelKind.ALLOCATION:
        return EmitCounts(
            variables=n_vms * n_hosts + n_vms + n_hosts,
            constraints=n_vms * n_hosts + 2 * n_hosts + 2 * n_vms,
        )
    return EmitCounts(
        variables=n_hosts + 2 * n_flavors * n_hosts,
        constraints=2 * n_flavors * n_hosts + 2 * n_hosts + n_flavors,
    )


def initial_flavor_counts(inst: Instance) -> list[list[int]]:
    """n[f][h]: how many VMs of flavor f start on host h."""
    counts = [[0] * len(inst.hosts) for _ in inst.flavors]
    for v in inst.vms:
        counts[v.flavor][inst.initial_host(v.id)] += 1
    return counts


def _fmt_num(x) -> str:
    f = Fraction(x)
    if f.denominator == 1:
        return str(f.numerator)
    text = f"{float(f):.12f}".rstrip("0").rstrip(".")
    return text or "0"


def _expr(terms: Sequence[tuple[object, str]], keep_zero: str | None = None) -> str:
    parts: list[str] = []
    for coef, name in terms:
        if coef == 0:
            continue
        sign = "-" if coef < 0 else "+"
        mag = _fmt_num(abs(coef))
        token = name if mag == "1" else f"{mag} {name}"
        if not parts:
            parts.append(token if sign == "+" else f"- {token}")
        else:
            parts.append(f"{sign} {token}")
    if not parts:
        if keep_zero is None:
            raise ValueError("empty linear expression")
        return f"0 {keep_zero}"
    return " ".join(parts)


def _migration_weight(weights: ObjectiveWeights):
    # pure bin-packing mode keeps a tiny migration preference for tie-breaks
    return MIGRATION_TIEBREAK_EPSILON if weights.w_m == 0 else weights.w_m


class _LpWriter:
    def __init__(self) -> None:
        self.rows: list[str] = []
        self.objective = ""
        self.bounds: list[str] = []
        self.general: list[str] = []
        self.binary: list[str] = []

    def constraint(self, name: str, expr: str, sense: str, rhs) -> None:
        self.rows.append(f" {name}: {expr} {sense} {_fmt_num(rhs)}")

    def render(self) -> str:
        lines = ["Minimize", f" obj: {self.objective}", "Subject To"]
        lines.extend(self.rows)
        if self.bounds:
            lines.append("Bounds")
            lines.extend(f" {b}" for b in self.bounds)
        if self.general:
            lines.append("General")
            lines.extend(f" {n}" for n in self.general)
        if self.binary:
            lines.append("Binary")
            lines.extend(f" {n}" for n in self.binary)
        lines.append("End")
        return "\n".join(lines) + "\n"


def emit_allocation_model(inst: Instance, weights: ObjectiveWeights, out: TextIO) -> EmitCounts:
    n_vms = len(inst.vms)
    n_hosts = len(inst.hosts)
    w = _LpWriter()
    w_mig = _migration_weight(weights)

    obj_terms: list[tuple[object, str]] = [
        (weights.w_a, f"active_h{h}") for h in range(n_hosts)
    ]
    obj_terms += [(w_mig * inst.vm_mem(v), f"migr_v{v}") for v in range(n_vms)]
    w.objective = _expr(obj_terms, keep_zero="active_h0")

    for v in range(n_vms):
        w.constraint(
            f"assign_v{v}",
            _expr([(1, f"alloc_v{v}_h{h}") for h in range(n_hosts)]),
            "=",
            1,
        )
    for h in range(n_hosts):
        terms = [(inst.vm_cpu(v), f"alloc_v{v}_h{h}") for v in range(n_vms)]
        w.constraint(f"cpu_h{h}", _expr(terms, keep_zero=f"active_h{h}"), "<=", inst.capacity(h).cpu)
    for h in range(n_hosts):
        terms = [(inst.vm_mem(v), f"alloc_v{v}_h{h}") for v in range(n_vms)]
        w.constraint(f"mem_h{h}", _expr(terms, keep_zero=f"active_h{h}"), "<=", inst.capacity(h).mem)
    for v in range(n_vms):
        for h in range(n_hosts):
            w.constraint(
                f"link_v{v}_h{h}",
                _expr([(1, f"alloc_v{v}_h{h}"), (-1, f"active_h{h}")]),
                "<=",
                0,
            )
    for v in range(n_vms):
        w.constraint(
            f"migr_v{v}",
            _expr([(1, f"migr_v{v}"), (1, f"alloc_v{v}_h{inst.initial_host(v)}")]),
            "=",
            1,
        )

    names = [f"alloc_v{v}_h{h}" for v in range(n_vms) for h in range(n_hosts)]
    names += [f"active_h{h}" for h in range(n_hosts)]
    names += [f"migr_v{v}" for v in range(n_vms)]
    w.binary = names
    out.write(w.render())
    return EmitCounts(len(names), len(w.rows))


def emit_flavor_flow_model(
    inst: Instance, weights: ObjectiveWeights, relaxed: bool, out: TextIO
) -> EmitCounts:
    n_hosts = len(inst.hosts)
    n_flavors = len(inst.flavors)
    counts = initial_flavor_counts(inst)
    w = _LpWriter()
    w_mig = _migration_weight(weights)

    obj_terms: list[tuple[object, str]] = [
        (weights.w_a, f"active_h{h}") for h in range(n_hosts)
    ]
    obj_terms += [
        (w_mig * inst.flavors[f].demand.mem, f"out_f{f}_h{h}")
        for f in range(n_flavors)
        for h in range(n_hosts)
    ]
    w.objective = _expr(obj_terms, keep_zero="active_h0")

    for f in range(n_flavors):
        terms = [(1, f"out_f{f}_h{h}") for h in range(n_hosts)]
        terms += [(-1, f"in_f{f}_h{h}") for h in range(n_hosts)]
        w.constraint(f"flow_f{f}", _expr(terms), "=", 0)
    for f in range(n_flavors):
        for h in range(n_hosts):
            w.constraint(f"outcap_f{f}_h{h}", _expr([(1, f"out_f{f}_h{h}")]), "<=", counts[f][h])
    for f in range(n_flavors):
        for h in range(n_hosts):
            n_fh = counts[f][h]
            w.constraint(
                f"evac_f{f}_h{h}",
                _expr(
                    [(-n_fh, f"active_h{h}"), (-1, f"out_f{f}_h{h}")],
                    keep_zero=f"out_f{f}_h{h}",
                ),
                "<=",
                -n_fh,
            )
    for h in range(n_hosts):
        terms = [
            (inst.flavors[f].demand.cpu, f"in_f{f}_h{h}") for f in range(n_flavors)
        ]
        terms += [
            (-inst.flavors[f].demand.cpu, f"out_f{f}_h{h}") for f in range(n_flavors)
        ]
        terms.append((-inst.capacity(h).cpu, f"active_h{h}"))
        rhs = -sum(inst.flavors[f].demand.cpu * counts[f][h] for f in range(n_flavors))
        w.constraint(f"cpu_h{h}", _expr(terms), "<=", rhs)
    for h in range(n_hosts):
        terms = [
            (inst.flavors[f].demand.mem, f"in_f{f}_h{h}") for f in range(n_flavors)
        ]
        terms += [
            (-inst.flavors[f].demand.mem, f"out_f{f}_h{h}") for f in range(n_flavors)
        ]
        terms.append((-inst.capacity(h).mem, f"active_h{h}"))
        rhs = -sum(inst.flavors[f].demand.mem * counts[f][h] for f in range(n_flavors))
        w.constraint(f"mem_h{h}", _expr(terms), "<=", rhs)

    flow_names = [
        f"{direction}_f{f}_h{h}"
        for direction in ("in", "out")
        for f in range(n_flavors)
        for h in range(n_hosts)
    ]
    w.bounds = [f"{name} >= 0" for name in flow_names]
    if not relaxed:
        w.general = flow_names
    w.binary = [f"active_h{h}" for h in range(n_hosts)]
    out.write(w.render())
    return EmitCounts(len(flow_names) + n_hosts, len(w.rows))


def emit_model(kind: ModelKind, inst: Instance, weights: ObjectiveWeights, out: TextIO) -> EmitCounts:
    if kind is ModelKind.ALLOCATION:
        return emit_allocation_model(inst, weights, out)
    return emit_flavor_flow_model(inst, weights, kind is ModelKind.RELAXED_FLAVOR_FLOW, out)


@dataclass
class SolutionReport:
    kind: ModelKind
    objective: int | Fraction | float
    mapping: Mapping | None
    variables: dict[str, float]


def _parse_variable_dump(text: str) -> dict[str, float]:
    values: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#") or line.startswith("\\"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise SolutionError(f"line {lineno}: expected 'name value', got {raw!r}")
        try:
            values[parts[0]] = float(parts[1])
        except ValueError as exc:
            raise SolutionError(f"line {lineno}: bad value {parts[1]!r}") from exc
    return values


def _as_int(name: str, value: float, tol: float) -> int:
    rounded = round(value)
    if abs(value - rounded) > tol:
        raise SolutionError(f"{name} = {value} is not integral")
    return int(rounded)


def read_solution(
    kind: ModelKind,
    inst: Instance,
    source: str | TextIO,
    weights: ObjectiveWeights,
    tol: float = 1e-6,
) -> SolutionReport:
    """Ingest a solver variable dump for a model emitted from ``inst``.

    Allocation solutions are reconstructed into a mapping and validated
    against every emitted row; flow solutions are validated for conservation,
    out-capacity, evacuation and resource rows but not expanded to a per-VM
    mapping (the formulation is deliberately symmetric across VMs of one
    flavor).  Missing variables default to zero.
    """
    text = source if isinstance(source, str) else source.read()
    values = _parse_variable_dump(text)
    if kind is ModelKind.ALLOCATION:
        return _read_allocation(inst, values, weights, tol)
    return _read_flow(kind, inst, values, weights, tol)


def _read_allocation(
    inst: Instance, values: dict[str, float], weights: ObjectiveWeights, tol: float
) -> SolutionReport:
    n_vms = len(inst.vms)
    n_hosts = len(inst.hosts)
    assignment: list[int | None] = [None] * n_vms
    for v in range(n_vms):
        chosen = [
            h
            for h in range(n_hosts)
            if _as_int(f"alloc_v{v}_h{h}", values.get(f"alloc_v{v}_h{h}", 0.0), tol) == 1
        ]
        if len(chosen) != 1:
            raise SolutionError(f"assign_v{v} violated: vm {v} allocated to {chosen}")
        assignment[v] = chosen[0]
    mapping = Mapping(inst, assignment)
    for h in range(n_hosts):
        lc, lm = mapping.load_parts(h)
        if lc > inst.capacity(h).cpu:
            raise SolutionError(f"cpu_h{h} violated: load {lc} > {inst.capacity(h).cpu}")
        if lm > inst.capacity(h).mem:
            raise SolutionError(f"mem_h{h} violated: load {lm} > {inst.capacity(h).mem}")
    active = [
        _as_int(f"active_h{h}", values.get(f"active_h{h}", 0.0), tol) for h in range(n_hosts)
    ]
    for h in range(n_hosts):
        if active[h] not in (0, 1):
            raise SolutionError(f"active_h{h} violated: {active[h]} is not binary")
    for v in range(n_vms):
        h = assignment[v]
        if active[h] != 1:
            raise SolutionError(f"link_v{v}_h{h} violated: vm on inactive host")
    migr = [_as_int(f"migr_v{v}", values.get(f"migr_v{v}", 0.0), tol) for v in range(n_vms)]
    for v in range(n_vms):
        expected = 0 if assignment[v] == inst.initial_host(v) else 1
        if migr[v] != expected:
            raise SolutionError(f"migr_v{v} violated: got {migr[v]}, expected {expected}")
    objective = weights.w_a * sum(active) + weights.w_m * sum(
        inst.vm_mem(v) * migr[v] for v in range(n_vms)
    )
    return SolutionReport(ModelKind.ALLOCATION, objective, mapping, values)


def _read_flow(
    kind: ModelKind,
    inst: Instance,
    values: dict[str, float],
    weights: ObjectiveWeights,
    tol: float,
) -> SolutionReport:
    n_hosts = len(inst.hosts)
    n_flavors = len(inst.flavors)
    counts = initial_flavor_counts(inst)
    relaxed = kind is ModelKind.RELAXED_FLAVOR_FLOW

    def flow_value(name: str) -> float | int:
        raw = values.get(name, 0.0)
        if relaxed:
            if raw < -tol:
                raise SolutionError(f"{name} violated: negative flow {raw}")
            return max(raw, 0.0)
        n = _as_int(name, raw, tol)
        if n < 0:
            raise SolutionError(f"{name} violated: negative flow {n}")
        return n

    active = [
        _as_int(f"active_h{h}", values.get(f"active_h{h}", 0.0), tol) for h in range(n_hosts)
    ]
    for h in range(n_hosts):
        if active[h] not in (0, 1):
            raise SolutionError(f"active_h{h} violated: {active[h]} is not binary")
    flow_in = [[flow_value(f"in_f{f}_h{h}") for h in range(n_hosts)] for f in range(n_flavors)]
    flow_out = [[flow_value(f"out_f{f}_h{h}") for h in range(n_hosts)] for f in range(n_flavors)]
    for f in range(n_flavors):
        if abs(sum(flow_out[f]) - sum(flow_in[f])) > tol:
            raise SolutionError(f"flow_f{f} violated: out {sum(flow_out[f])} != in {sum(flow_in[f])}")
        for h in range(n_hosts):
            if flow_out[f][h] > counts[f][h] + tol:
                raise SolutionError(
                    f"outcap_f{f}_h{h} violated: out {flow_out[f][h]} > {counts[f][h]}"
                )
            if counts[f][h] * (1 - active[h]) > flow_out[f][h] + tol:
                raise SolutionError(
                    f"evac_f{f}_h{h} violated: inactive host retains {counts[f][h]} VMs"
                )
    for h in range(n_hosts):
        for resource, cap in (("cpu", inst.capacity(h).cpu), ("mem", inst.capacity(h).mem)):
            total = 0.0
            for f in range(n_flavors):
                demand = getattr(inst.flavors[f].demand, resource)
                total += demand * (counts[f][h] + flow_in[f][h] - flow_out[f][h])
            if total > cap * active[h] + tol:
                raise SolutionError(
                    f"{resource}_h{h} violated: load {total} > {cap * active[h]}"
                )
    mem_out = sum(
        inst.flavors[f].demand.mem * flow_out[f][h]
        for f in range(n_flavors)
        for h in range(n_hosts)
    )
    objective = weights.w_a * sum(active) + weights.w_m * mem_out
    return SolutionReport(kind, objective, None, values)


_SECTION_NAMES = {
    "minimize": "objective",
    "maximize": "objective",
    "subject to": "constraints",
    "st": "constraints",
    "s.t.": "constraints",
    "bounds": "bounds",
    "general": "general",
    "generals": "general",
    "binary": "binary",
    "binaries": "binary",
}

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


def lp_entity_counts(text: str) -> EmitCounts:
    """Count distinct variables and constraint rows in an emitted LP file."""
    section = None
    names: set[str] = set()
    rows = 0
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        key = line.lower()
        if key in _SECTION_NAMES:
            section = _SECTION_NAMES[key]
            continue
        if key == "end":
            break
        if section == "objective":
            body = line.split(":", 1)[1] if ":" in line else line
            names.update(_IDENT.findall(body))
        elif section == "constraints":
            if ":" in line:
                rows += 1
                body = line.split(":", 1)[1]
            else:
                body = line
            names.update(_IDENT.findall(body))
        elif section in ("bounds", "general", "binary"):
            names.update(_IDENT.findall(line))
    return EmitCounts(len(names), rows)

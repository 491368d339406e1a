"""Stereotype checks, simple disclosure report and data dependency matrix."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass

from pleak.model import (
    DECRYPT_KINDS,
    ENCRYPT_KINDS,
    FlowNode,
    ProcessModel,
    Stereotype,
    _pool_executions,
    _topological,
    pool_order,
)

__all__ = [
    "Stereotype",
    "ValidationIssue",
    "DisclosureReport",
    "DependencyMatrix",
    "validate_stereotypes",
    "disclosure_report",
    "dependency_matrix",
    "SHARED_OVER",
    "PROTECTION_KINDS",
]

SHARED_OVER = "shared over"
ABSENT = "–"
# Stereotypes that hide data; removing one can only reveal more.
PROTECTION_KINDS = ("MPC", "SSSharing", "PKEncrypt", "SKEncrypt")


@dataclass(frozen=True)
class ValidationIssue:
    code: str
    message: str
    node_ids: tuple[str, ...]


@dataclass(frozen=True)
class DisclosureReport:
    stakeholders: tuple[str, ...]
    objects: tuple[str, ...]
    cells: tuple[tuple[str, ...], ...]

    def cell(self, stakeholder: str, obj: str) -> str:
        return self.cells[self.stakeholders.index(stakeholder)][self.objects.index(obj)]

    def row(self, stakeholder: str) -> dict[str, str]:
        return dict(zip(self.objects, self.cells[self.stakeholders.index(stakeholder)]))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["stakeholder", *self.objects])
        for name, row in zip(self.stakeholders, self.cells):
            writer.writerow([name, *row])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {
            "objects": list(self.objects),
            "rows": [{"stakeholder": s, "cells": list(r)} for s, r in zip(self.stakeholders, self.cells)],
        }


@dataclass(frozen=True)
class DependencyMatrix:
    objects: tuple[str, ...]
    cells: tuple[tuple[str, ...], ...]

    def cell(self, source: str, target: str) -> str:
        return self.cells[self.objects.index(source)][self.objects.index(target)]

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["", *self.objects])
        for name, row in zip(self.objects, self.cells):
            writer.writerow([name, *row])
        return buf.getvalue()

    def to_json(self) -> dict:
        return {"objects": list(self.objects), "cells": [list(r) for r in self.cells]}


def _stereotyped(model: ProcessModel, kinds) -> list[FlowNode]:
    return [t for t in model.tasks() if t.stereotype is not None and t.stereotype.kind in kinds]


def _conditional_tasks(model: ProcessModel) -> set[str]:
    """Tasks that some XOR resolution of their pool skips."""
    conditional = set()
    for pool in model.pools:
        if pool_order(pool) is None:
            continue
        executions = _pool_executions(pool, cap=10**6)
        for node in pool.nodes:
            if node.is_task and not all(node.id in ex for ex, _ in executions):
                conditional.add(node.id)
    return conditional


def _mpc_groups(model: ProcessModel) -> dict[str, list[FlowNode]]:
    groups: dict[str, list[FlowNode]] = {}
    for task in _stereotyped(model, ("MPC",)):
        groups.setdefault(task.stereotype.group_id, []).append(task)
    return groups


def _sharing_group(task: FlowNode) -> str:
    return task.stereotype.group_id or task.id


def validate_stereotypes(model: ProcessModel) -> list[ValidationIssue]:
    issues = []
    conditional = _conditional_tasks(model)
    for group, members in _mpc_groups(model).items():
        ids = tuple(m.id for m in members)
        pools = {model.pool_of(m.id).id for m in members}
        labels = {m.label for m in members}
        if len(members) < 2 or len(pools) < len(members):
            issues.append(ValidationIssue(
                "V1", f"MPC group {group!r} needs a twin task with the same label in another pool", ids))
        elif len(labels) > 1:
            issues.append(ValidationIssue(
                "V1", f"MPC group {group!r} mixes labels {sorted(labels)}", ids))
        flags = {m.id in conditional for m in members}
        if len(flags) > 1:
            issues.append(ValidationIssue(
                "V2", f"MPC group {group!r} has members behind an XOR split that their twins are not behind", ids))
        # a lone member is already reported as missing its twin
        if len(members) >= 2 and (not any(m.inputs for m in members) or not any(m.outputs for m in members)):
            issues.append(ValidationIssue(
                "V3", f"MPC group {group!r} needs at least one input and one output", ids))

    encrypt_keys = {(t.stereotype.kind[:2], t.stereotype.key_ref) for t in _stereotyped(model, ENCRYPT_KINDS)}
    for task in _stereotyped(model, DECRYPT_KINDS):
        if (task.stereotype.kind[:2], task.stereotype.key_ref) not in encrypt_keys:
            issues.append(ValidationIssue(
                "V4", f"decryption in {task.id!r} uses key {task.stereotype.key_ref!r} that nothing encrypts with",
                (task.id,)))

    share_group = {}
    for task in _stereotyped(model, ("SSSharing",)):
        for name in task.outputs:
            share_group[name] = _sharing_group(task)
    for task in _stereotyped(model, ("SSReconstruction",)):
        counts: dict[str, int] = {}
        for name in set(task.inputs):
            if name in share_group:
                counts[share_group[name]] = counts.get(share_group[name], 0) + 1
        best = max(counts.values(), default=0)
        if best < task.stereotype.threshold:
            issues.append(ValidationIssue(
                "V5", f"reconstruction in {task.id!r} consumes {best} shares of one sharing, "
                      f"threshold is {task.stereotype.threshold}", (task.id,)))
    return issues


# -- protection states -----------------------------------------------------
# A state is ("plain",), ("cipher", key) or ("share", sharing task id).

PLAIN = ("plain",)


def _task_order(model: ProcessModel) -> list[FlowNode]:
    """Tasks ordered by sequence flows, message flows and data dependencies."""
    rank, nodes = {}, []
    for pi, pool in enumerate(model.pools):
        for pos, n in enumerate(pool_order(pool) or [x.id for x in pool.nodes]):
            rank[n] = (pi, pos)
            nodes.append(n)
    edges = [e for pool in model.pools for e in pool.flows]
    edges += [(m.source, m.target) for m in model.message_flows]
    producers: dict[str, list[str]] = {}
    for task in model.tasks():
        for name in task.outputs:
            producers.setdefault(name, []).append(task.id)
    data_edges = [(p, t.id) for t in model.tasks() for name in t.inputs
                  for p in producers.get(name, []) if p != t.id]
    order = _topological(nodes, edges + data_edges, rank)
    if order is None:
        order = _topological(nodes, edges, rank) or sorted(nodes, key=rank.get)
    return [model.node(n) for n in order if model.node(n).is_task]


def object_states(model: ProcessModel) -> dict[str, tuple]:
    """Forward propagation of protection states over tasks in dataflow order."""
    states: dict[str, tuple] = {}
    for task in _task_order(model):
        st: Stereotype | None = task.stereotype
        # decryption yields plaintext like any unprotected computation; a key
        # mismatch is a V4 issue, not a protection state
        if st is None or st.kind in ("MPC", "SSReconstruction") or st.kind in DECRYPT_KINDS:
            out = PLAIN
        elif st.kind in ENCRYPT_KINDS:
            out = ("cipher", st.key_ref)
        else:  # SSSharing
            out = ("share", task.id)
        for name in task.outputs:
            prev = states.get(name)
            # several producers: the least protected state wins
            states[name] = PLAIN if prev == PLAIN else (out if prev is None or out == PLAIN else prev)
    for name in model.data_objects:
        states.setdefault(name, PLAIN)
    return states


def _share_thresholds(model: ProcessModel) -> dict[str, int]:
    sharing = {t.id: t for t in _stereotyped(model, ("SSSharing",))}
    thresholds = {tid: max(1, len(t.outputs)) for tid, t in sharing.items()}
    producer = {name: tid for tid, t in sharing.items() for name in t.outputs}
    for task in _stereotyped(model, ("SSReconstruction",)):
        for name in task.inputs:
            if name in producer:
                tid = producer[name]
                thresholds[tid] = min(thresholds[tid], task.stereotype.threshold)
    return thresholds


def disclosure_report(model: ProcessModel) -> DisclosureReport:
    states = object_states(model)
    thresholds = _share_thresholds(model)
    key_holders: dict[str, set[str]] = {}
    for task in _stereotyped(model, DECRYPT_KINDS):
        key_holders.setdefault(task.stereotype.key_ref, set()).add(model.pool_of(task.id).id)

    sharing_outputs = {t.id: set(t.outputs) for t in _stereotyped(model, ("SSSharing",))}

    objects = tuple(model.data_objects)
    rows, names = [], []
    for pool in model.pools:
        # appearance: object name -> list of states as seen in this pool
        seen: dict[str, list[tuple]] = {}
        for name, obj in model.data_objects.items():
            if obj.pool == pool.id:
                seen.setdefault(name, []).append(states[name])
        for node in pool.nodes:
            mpc = node.stereotype is not None and node.stereotype.kind == "MPC"
            for name in node.inputs:
                foreign = model.data_objects[name].pool != pool.id
                seen.setdefault(name, []).append(("mpc",) if mpc and foreign else states[name])
            for name in node.outputs:
                seen.setdefault(name, []).append(states[name])
        for flow in model.message_flows:
            if model.pool_of(flow.target).id == pool.id:
                for name in flow.data:
                    seen.setdefault(name, []).append(states[name])

        # a share counts towards its sharing whatever state it ends up in
        shares_here = {tid: len(outs & seen.keys()) for tid, outs in sharing_outputs.items()}

        def readable(state):
            if state == PLAIN:
                return True
            if state[0] == "cipher":
                return pool.id in key_holders.get(state[1], ())
            if state[0] == "share":
                return shares_here.get(state[1], 0) >= thresholds.get(state[1], 1)
            return False

        row = []
        for name in objects:
            if name not in seen:
                row.append(ABSENT)
            else:
                row.append("V" if any(readable(s) for s in seen[name]) else "H")
        rows.append(tuple(row))
        names.append(pool.name)

    wire: dict[str, list[tuple]] = {}
    for flow in model.message_flows:
        for name in flow.data:
            wire.setdefault(name, []).append(states[name])
    rows.append(tuple(
        ABSENT if name not in wire else ("V" if PLAIN in wire[name] else "H") for name in objects
    ))
    names.append(SHARED_OVER)
    return DisclosureReport(tuple(names), objects, tuple(rows))


def _computation_units(model: ProcessModel) -> list[tuple[set[str], set[str]]]:
    """(inputs, outputs) per plain task; an MPC group acts as one joint task."""
    units, groups = [], {}
    for task in model.tasks():
        if task.stereotype is not None and task.stereotype.kind == "MPC":
            ins, outs = groups.setdefault(task.stereotype.group_id, (set(), set()))
            ins.update(task.inputs)
            outs.update(task.outputs)
        else:
            units.append((set(task.inputs), set(task.outputs)))
    return units + list(groups.values())


def dependency_matrix(model: ProcessModel) -> DependencyMatrix:
    objects = tuple(model.data_objects)
    direct = {o: set() for o in objects}
    for ins, outs in _computation_units(model):
        for i in ins:
            direct[i].update(outs)
    closure = {}
    for o in objects:
        reached, stack = set(), list(direct[o])
        while stack:
            x = stack.pop()
            if x not in reached:
                reached.add(x)
                stack.extend(direct[x])
        closure[o] = reached
    cells = []
    for src in objects:
        row = []
        for dst in objects:
            if src == dst:
                row.append(ABSENT)
            elif dst in direct[src]:
                row.append("D")
            elif dst in closure[src]:
                row.append("I")
            else:
                row.append(ABSENT)
        cells.append(tuple(row))
    return DependencyMatrix(objects, tuple(cells))


def report_json(report) -> str:
    return json.dumps(report.to_json(), indent=2, ensure_ascii=False)

"""Process models: JSON loading, structural checks and run enumeration."""
from __future__ import annotations

import heapq
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from pleak.errors import ModelError, RunExplosionError

NODE_KINDS = ("task", "startEvent", "endEvent", "xorGateway", "andGateway")
STEREOTYPE_KINDS = (
    "MPC",
    "SSSharing",
    "SSReconstruction",
    "PKEncrypt",
    "PKDecrypt",
    "SKEncrypt",
    "SKDecrypt",
)
ENCRYPT_KINDS = ("PKEncrypt", "SKEncrypt")
DECRYPT_KINDS = ("PKDecrypt", "SKDecrypt")
DEFAULT_RUN_CAP = 1024


@dataclass(frozen=True)
class Stereotype:
    kind: str
    group_id: str | None = None
    key_ref: str | None = None
    threshold: int | None = None

    def __post_init__(self):
        if self.kind not in STEREOTYPE_KINDS:
            raise ModelError(f"unknown stereotype kind {self.kind!r}")
        if self.kind == "MPC" and not self.group_id:
            raise ModelError("MPC stereotype requires groupId")
        if self.kind in ENCRYPT_KINDS + DECRYPT_KINDS and not self.key_ref:
            raise ModelError(f"{self.kind} stereotype requires keyRef")
        if self.kind == "SSReconstruction" and (self.threshold is None or self.threshold < 1):
            raise ModelError("SSReconstruction stereotype requires threshold >= 1")

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.group_id is not None:
            out["groupId"] = self.group_id
        if self.key_ref is not None:
            out["keyRef"] = self.key_ref
        if self.threshold is not None:
            out["threshold"] = self.threshold
        return out


@dataclass(frozen=True)
class FlowNode:
    id: str
    kind: str
    label: str = ""
    inputs: tuple[str, ...] = ()
    outputs: tuple[str, ...] = ()
    stereotype: Stereotype | None = None
    script_file: str | None = None

    @property
    def is_task(self) -> bool:
        return self.kind == "task"

    @property
    def is_gateway(self) -> bool:
        return self.kind in ("xorGateway", "andGateway")


@dataclass(frozen=True)
class Pool:
    id: str
    name: str
    nodes: tuple[FlowNode, ...] = ()
    flows: tuple[tuple[str, str], ...] = ()

    def successors(self, node_id: str) -> list[str]:
        return [dst for src, dst in self.flows if src == node_id]

    def predecessors(self, node_id: str) -> list[str]:
        return [src for src, dst in self.flows if dst == node_id]

    def start_events(self) -> list[FlowNode]:
        return [n for n in self.nodes if n.kind == "startEvent"]


@dataclass(frozen=True)
class MessageFlow:
    source: str
    target: str
    data: tuple[str, ...] = ()


@dataclass(frozen=True)
class DataObject:
    name: str
    pool: str
    schema_file: str | None = None
    data_file: str | None = None
    norm_file: str | None = None


@dataclass(frozen=True)
class ProcessModel:
    pools: tuple[Pool, ...] = ()
    message_flows: tuple[MessageFlow, ...] = ()
    data_objects: dict[str, DataObject] = field(default_factory=dict)
    attacker_file: str | None = None
    sensitive_file: str | None = None
    base_dir: Path | None = field(default=None, compare=False)

    def __post_init__(self):
        nodes, owner = {}, {}
        for pool in self.pools:
            for node in pool.nodes:
                nodes[node.id] = node
                owner[node.id] = pool
        object.__setattr__(self, "_nodes", nodes)
        object.__setattr__(self, "_owner", owner)

    def node(self, node_id: str) -> FlowNode:
        return self._nodes[node_id]

    def has_node(self, node_id: str) -> bool:
        return node_id in self._nodes

    def pool_of(self, node_id: str) -> Pool:
        return self._owner[node_id]

    def pool_by_id(self, pool_id: str) -> Pool:
        for pool in self.pools:
            if pool.id == pool_id:
                return pool
        raise KeyError(pool_id)

    def tasks(self) -> list[FlowNode]:
        return [n for pool in self.pools for n in pool.nodes if n.is_task]

    def resolve(self, relative: str) -> Path:
        path = Path(relative)
        if not path.is_absolute() and self.base_dir is not None:
            path = self.base_dir / path
        return path


@dataclass(frozen=True)
class StructuralIssue:
    code: str
    message: str
    node_ids: tuple[str, ...] = ()


@dataclass(frozen=True)
class Run:
    index: int
    tasks: tuple[str, ...]
    choices: tuple[tuple[str, str], ...] = ()


# -- loading ---------------------------------------------------------------

def _require(obj, key, where):
    if not isinstance(obj, dict) or key not in obj:
        raise ModelError(f"{where}: missing field {key!r}")
    return obj[key]


def _names(value, where) -> tuple[str, ...]:
    if value is None:
        return ()
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise ModelError(f"{where}: expected a list of names")
    return tuple(value)


def _stereotype(raw, where) -> Stereotype | None:
    if raw is None:
        return None
    if not isinstance(raw, dict):
        raise ModelError(f"{where}: stereotype must be an object")
    return Stereotype(
        kind=_require(raw, "kind", where),
        group_id=raw.get("groupId"),
        key_ref=raw.get("keyRef"),
        threshold=raw.get("threshold"),
    )


def model_from_dict(doc: dict, base_dir: Path | None = None) -> ProcessModel:
    if not isinstance(doc, dict):
        raise ModelError("top-level JSON value must be an object")
    pools, seen = [], set()
    for i, raw_pool in enumerate(doc.get("pools", [])):
        where = f"pools[{i}]"
        pool_id = _require(raw_pool, "id", where)
        nodes = []
        for j, raw in enumerate(raw_pool.get("nodes", [])):
            nwhere = f"{where}.nodes[{j}]"
            node_id = _require(raw, "id", nwhere)
            kind = _require(raw, "kind", nwhere)
            if kind not in NODE_KINDS:
                raise ModelError(f"{nwhere}: unknown node kind {kind!r}")
            if node_id in seen or node_id == pool_id:
                raise ModelError(f"duplicate id {node_id!r}")
            seen.add(node_id)
            nodes.append(
                FlowNode(
                    id=node_id,
                    kind=kind,
                    label=raw.get("label", ""),
                    inputs=_names(raw.get("inputs"), nwhere),
                    outputs=_names(raw.get("outputs"), nwhere),
                    stereotype=_stereotype(raw.get("stereotype"), nwhere),
                    script_file=raw.get("scriptFile"),
                )
            )
        ids = {n.id for n in nodes}
        flows = []
        for edge in raw_pool.get("flows", []):
            if not (isinstance(edge, list) and len(edge) == 2):
                raise ModelError(f"{where}: flow must be a [src, dst] pair")
            for end in edge:
                if end not in ids:
                    raise ModelError(f"{where}: flow references unknown id {end!r}", missing_id=end)
            flows.append((edge[0], edge[1]))
        if pool_id in seen:
            raise ModelError(f"duplicate id {pool_id!r}")
        seen.add(pool_id)
        pools.append(Pool(pool_id, raw_pool.get("name", pool_id), tuple(nodes), tuple(flows)))

    pool_ids = {p.id for p in pools}
    node_ids = seen - pool_ids
    objects = {}
    for i, raw in enumerate(doc.get("dataObjects", [])):
        where = f"dataObjects[{i}]"
        name = _require(raw, "name", where)
        pool = _require(raw, "pool", where)
        if pool not in pool_ids:
            raise ModelError(f"{where}: unknown pool {pool!r}", missing_id=pool)
        if name in objects:
            raise ModelError(f"duplicate data object {name!r}")
        objects[name] = DataObject(
            name, pool, raw.get("schemaFile"), raw.get("dataFile"), raw.get("normFile")
        )

    message_flows = []
    for i, raw in enumerate(doc.get("messageFlows", [])):
        where = f"messageFlows[{i}]"
        src, dst = _require(raw, "source", where), _require(raw, "target", where)
        for end in (src, dst):
            if end not in node_ids:
                raise ModelError(f"{where}: unknown id {end!r}", missing_id=end)
        message_flows.append(MessageFlow(src, dst, _names(raw.get("data"), where)))

    for pool in pools:
        for node in pool.nodes:
            for name in node.inputs + node.outputs:
                if name not in objects:
                    raise ModelError(f"node {node.id!r} references unknown data object {name!r}", missing_id=name)
    for flow in message_flows:
        for name in flow.data:
            if name not in objects:
                raise ModelError(f"message flow references unknown data object {name!r}", missing_id=name)

    return ProcessModel(
        pools=tuple(pools),
        message_flows=tuple(message_flows),
        data_objects=objects,
        attacker_file=doc.get("attackerFile"),
        sensitive_file=doc.get("sensitiveFile"),
        base_dir=base_dir,
    )


def load_model(text: str, base_dir: Path | str | None = None) -> ProcessModel:
    """Parse a model JSON document into a linked :class:`ProcessModel`."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelError(f"invalid JSON: {exc.msg}", line=exc.lineno, column=exc.colno) from exc
    return model_from_dict(doc, Path(base_dir) if base_dir is not None else None)


def load_model_file(path: str | os.PathLike) -> ProcessModel:
    path = Path(path)
    return load_model(path.read_text(encoding="utf-8"), base_dir=path.parent)


def model_to_dict(model: ProcessModel) -> dict:
    def node_dict(n: FlowNode) -> dict:
        out = {"id": n.id, "kind": n.kind, "label": n.label,
               "inputs": list(n.inputs), "outputs": list(n.outputs)}
        if n.stereotype is not None:
            out["stereotype"] = n.stereotype.to_json()
        if n.script_file is not None:
            out["scriptFile"] = n.script_file
        return out

    def object_dict(o: DataObject) -> dict:
        out = {"name": o.name, "pool": o.pool}
        for key, value in (("schemaFile", o.schema_file), ("dataFile", o.data_file), ("normFile", o.norm_file)):
            if value is not None:
                out[key] = value
        return out

    doc = {
        "pools": [
            {"id": p.id, "name": p.name, "nodes": [node_dict(n) for n in p.nodes],
             "flows": [list(e) for e in p.flows]}
            for p in model.pools
        ],
        "messageFlows": [
            {"source": m.source, "target": m.target, "data": list(m.data)} for m in model.message_flows
        ],
        "dataObjects": [object_dict(o) for o in model.data_objects.values()],
    }
    if model.attacker_file is not None:
        doc["attackerFile"] = model.attacker_file
    if model.sensitive_file is not None:
        doc["sensitiveFile"] = model.sensitive_file
    return doc


def dump_model(model: ProcessModel) -> str:
    return json.dumps(model_to_dict(model), indent=2)


# -- structure -------------------------------------------------------------

def _topological(nodes: list[str], edges: Iterable[tuple[str, str]], rank: dict[str, tuple]) -> list[str] | None:
    """Kahn's algorithm with a deterministic tie-break; None on a cycle."""
    succ = {n: [] for n in nodes}
    indeg = {n: 0 for n in nodes}
    for src, dst in edges:
        if src in succ and dst in indeg:
            succ[src].append(dst)
            indeg[dst] += 1
    heap = [(rank[n], n) for n in nodes if indeg[n] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        _, n = heapq.heappop(heap)
        order.append(n)
        for m in succ[n]:
            indeg[m] -= 1
            if indeg[m] == 0:
                heapq.heappush(heap, (rank[m], m))
    return order if len(order) == len(nodes) else None


def pool_order(pool: Pool) -> list[str] | None:
    rank = {n.id: (i,) for i, n in enumerate(pool.nodes)}
    return _topological([n.id for n in pool.nodes], pool.flows, rank)


def validate_structure(model: ProcessModel) -> list[StructuralIssue]:
    issues: list[StructuralIssue] = []
    for pool in model.pools:
        starts = pool.start_events()
        if len(starts) > 1:
            issues.append(StructuralIssue(
                "multiple start events", f"pool {pool.name!r} has {len(starts)} start events",
                tuple(n.id for n in starts)))
        elif not starts and pool.nodes:
            issues.append(StructuralIssue("missing start event", f"pool {pool.name!r} has no start event"))
        if pool_order(pool) is None:
            issues.append(StructuralIssue("cycle", f"pool {pool.name!r} contains a cycle",
                                          tuple(n.id for n in pool.nodes)))
        if starts:
            reached, stack = {starts[0].id}, [starts[0].id]
            for extra in starts[1:]:
                reached.add(extra.id)
                stack.append(extra.id)
            while stack:
                for nxt in pool.successors(stack.pop()):
                    if nxt not in reached:
                        reached.add(nxt)
                        stack.append(nxt)
            missing = tuple(n.id for n in pool.nodes if n.id not in reached)
            if missing:
                issues.append(StructuralIssue("unreachable node", "nodes not reachable from the start event", missing))
        for node in pool.nodes:
            if not node.is_gateway:
                continue
            n_out, n_in = len(pool.successors(node.id)), len(pool.predecessors(node.id))
            if n_out <= 1 and n_in <= 1:
                issues.append(StructuralIssue("degenerate gateway",
                                              f"gateway {node.id!r} neither splits nor joins", (node.id,)))
            if node.inputs or node.outputs:
                issues.append(StructuralIssue("gateway data association",
                                              f"gateway {node.id!r} has data associations", (node.id,)))
    for flow in model.message_flows:
        if model.pool_of(flow.source).id == model.pool_of(flow.target).id:
            issues.append(StructuralIssue("message flow within pool",
                                          "message flow endpoints share a pool", (flow.source, flow.target)))
    return issues


# -- runs ------------------------------------------------------------------

def _pool_executions(pool: Pool, cap: int) -> list[tuple[frozenset, tuple]]:
    """All sets of executed nodes in ``pool``, one per XOR resolution."""
    order = pool_order(pool)
    if order is None:
        raise ModelError(f"pool {pool.name!r} contains a cycle")
    if not order:
        return [(frozenset(), ())]
    kinds = {n.id: n.kind for n in pool.nodes}
    incoming = {n: [] for n in order}
    for edge in pool.flows:
        incoming[edge[1]].append(edge)
    outgoing = {n: [e for e in pool.flows if e[0] == n] for n in order}
    results = []

    def walk(pos, active, executed, choices):
        active = set(active)
        executed = set(executed)
        for j in range(pos, len(order)):
            n = order[j]
            if not (kinds[n] == "startEvent" or any(e in active for e in incoming[n])):
                continue
            executed.add(n)
            outs = outgoing[n]
            if kinds[n] == "xorGateway" and len(outs) >= 2:
                for edge in outs:
                    walk(j + 1, active | {edge}, executed, choices + ((n, edge[1]),))
                return
            active.update(outs)
        results.append((frozenset(executed), choices))
        if len(results) > cap:
            raise RunExplosionError(f"pool {pool.name!r} has more than {cap} runs")

    walk(0, set(), set(), ())
    return results


def run_cap_from_env() -> int:
    raw = os.environ.get("PLEAK_RUN_CAP")
    return int(raw) if raw else DEFAULT_RUN_CAP


def enumerate_runs(model: ProcessModel, cap: int | None = None) -> list[Run]:
    """One run per combination of XOR decisions across all pools.

    AND branches are merged into a single canonical order: sequence and
    message flows are respected, ties broken by pool then declaration order.
    """
    if cap is None:
        cap = run_cap_from_env()
    per_pool = [_pool_executions(pool, cap) for pool in model.pools]
    total = 1
    for options in per_pool:
        total *= len(options)
    if total > cap:
        raise RunExplosionError(f"model has {total} runs, more than the cap of {cap}")

    rank = {}
    for pi, pool in enumerate(model.pools):
        for pos, n in enumerate(pool_order(pool) or []):
            rank[n] = (pi, pos)
    seq_edges = [e for pool in model.pools for e in pool.flows]
    msg_edges = [(m.source, m.target) for m in model.message_flows]

    runs = []
    combos = [()]
    for options in per_pool:
        combos = [c + (o,) for c in combos for o in options]
    for index, combo in enumerate(combos):
        executed = set().union(*(o[0] for o in combo)) if combo else set()
        choices = tuple(ch for o in combo for ch in o[1])
        nodes = sorted(executed, key=lambda n: rank[n])
        order = _topological(nodes, seq_edges + msg_edges, rank)
        if order is None:
            order = _topological(nodes, seq_edges, rank)
        tasks = tuple(n for n in order if model.node(n).is_task)
        runs.append(Run(index, tasks, choices))
    return runs

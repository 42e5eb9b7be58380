"""Topological map: landmark/turn keyframe nodes, reachability edges, revisit fusion.

Nodes are the keyframes that matter for navigation: those associated with a
landmark and those where the trajectory turns. Consecutive nodes along the
trajectory are linked by undirected edges whose length is the arc length of
the keyframe path between them. Revisited places produce duplicate nodes,
which fuse_revisits merges. Completed graphs are immutable value objects and
safe for concurrent reads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .landmarks import LandmarkAssociation
from .model import KeyframeRecord, wrap_angle

LANDMARK = "landmark"
TURN = "turn"

DEFAULT_TURN_THRESHOLD = math.pi / 6
DEFAULT_TURN_WINDOW = 5
DEFAULT_MERGE_RADIUS = 5.0


@dataclass
class TopoNode:
    node_id: int
    kind: str
    position: np.ndarray
    landmark_names: tuple[str, ...] = ()
    source_frame_ids: tuple[int, ...] = ()

    def __post_init__(self):
        self.node_id = int(self.node_id)
        if self.kind not in (LANDMARK, TURN):
            raise ValidationError(f"node kind must be {LANDMARK!r} or {TURN!r}, got {self.kind!r}")
        self.position = np.asarray(self.position, dtype=float)
        if self.position.shape != (3,):
            raise ValidationError("node position must be a 3-vector")
        self.landmark_names = tuple(self.landmark_names)
        if (self.kind == LANDMARK) != bool(self.landmark_names):
            raise ValidationError("landmark_names must be non-empty exactly for landmark nodes")
        self.source_frame_ids = tuple(self.source_frame_ids)
        if not self.source_frame_ids:
            raise ValidationError("source_frame_ids must be non-empty")
        if any(b <= a for a, b in zip(self.source_frame_ids, self.source_frame_ids[1:])):
            raise ValidationError("source_frame_ids must be sorted and unique")


@dataclass
class TopoEdge:
    """Undirected edge between two node ids, endpoints stored low-high."""

    a: int
    b: int
    length: float

    def __post_init__(self):
        self.a, self.b = int(self.a), int(self.b)
        if self.a == self.b:
            raise ValidationError("self-loop edges are not allowed")
        if self.a > self.b:
            self.a, self.b = self.b, self.a
        self.length = float(self.length)
        if self.length < 0.0:
            raise ValidationError("edge length must be non-negative")

    @property
    def endpoints(self) -> tuple[int, int]:
        return (self.a, self.b)


@dataclass
class TopoGraph:
    nodes: list[TopoNode]
    edges: list[TopoEdge]

    def __post_init__(self):
        ids = [n.node_id for n in self.nodes]
        if len(set(ids)) != len(ids):
            raise ValidationError("node ids must be unique")
        known = set(ids)
        seen_pairs = set()
        for edge in self.edges:
            if edge.a not in known or edge.b not in known:
                raise ValidationError(f"edge {edge.endpoints} references an unknown node")
            if edge.endpoints in seen_pairs:
                raise ValidationError(f"duplicate edge {edge.endpoints}")
            seen_pairs.add(edge.endpoints)

    def node(self, node_id: int) -> TopoNode:
        for n in self.nodes:
            if n.node_id == node_id:
                return n
        raise ValidationError(f"no node with id {node_id}")


def detect_turns(keyframes: list[KeyframeRecord],
                 angle_threshold: float = DEFAULT_TURN_THRESHOLD,
                 window: int = DEFAULT_TURN_WINDOW) -> list[int]:
    """Frames where heading change accumulated over a trailing window crosses
    the threshold.

    The window is counted in keyframes, so it covers window-1 heading steps.
    Runs of flagged frames starting within one window collapse to the frame
    with the largest single-step heading change (earliest on ties).
    """
    if len(keyframes) < 2:
        raise ValidationError("turn detection needs at least 2 keyframes")
    if window < 2:
        raise ValidationError(f"window must be >= 2, got {window}")
    headings = [k.heading for k in keyframes]
    n = len(headings)
    step = [0.0] * n
    for j in range(1, n):
        step[j] = abs(wrap_angle(headings[j] - headings[j - 1]))

    flagged = []
    for j in range(1, n):
        lo = max(1, j - window + 2)
        if sum(step[lo:j + 1]) >= angle_threshold:
            flagged.append(j)

    turns: list[int] = []
    i = 0
    while i < len(flagged):
        start = flagged[i]
        group = [flagged[i]]
        i += 1
        while i < len(flagged) and flagged[i] - start < window:
            group.append(flagged[i])
            i += 1
        peak = max(group, key=lambda j: (step[j], -j))
        turns.append(keyframes[peak].frame_id)
    return turns


def build_topo(keyframes: list[KeyframeRecord], associations: list[LandmarkAssociation],
               turns: list[int]) -> TopoGraph:
    """One node per landmark-associated or turn keyframe, chained along the
    trajectory.

    Landmarks sharing a keyframe merge into one node's landmark_names; a frame
    that is both a turn and landmark-associated becomes a landmark node. Edge
    length is the keyframe-path arc length between consecutive nodes.
    """
    index_of = {k.frame_id: i for i, k in enumerate(keyframes)}
    names_by_frame: dict[int, set[str]] = {}
    for assoc in associations:
        if assoc.frame_id not in index_of:
            raise ValidationError(f"association references unknown frame {assoc.frame_id}")
        names_by_frame.setdefault(assoc.frame_id, set()).add(assoc.name)
    for fid in turns:
        if fid not in index_of:
            raise ValidationError(f"turn references unknown frame {fid}")

    node_frames = sorted(set(names_by_frame) | set(turns))
    if not node_frames:
        return TopoGraph(nodes=[], edges=[])

    nodes = []
    for node_id, fid in enumerate(node_frames):
        names = tuple(sorted(names_by_frame.get(fid, ())))
        nodes.append(TopoNode(
            node_id=node_id,
            kind=LANDMARK if names else TURN,
            position=keyframes[index_of[fid]].position,
            landmark_names=names,
            source_frame_ids=(fid,),
        ))

    # Prefix arc length over the keyframe path, for O(1) edge lengths.
    arc = [0.0]
    for prev, cur in zip(keyframes, keyframes[1:]):
        arc.append(arc[-1] + float(np.linalg.norm(cur.position - prev.position)))

    edges = []
    for left, right in zip(nodes, nodes[1:]):
        ia = index_of[left.source_frame_ids[0]]
        ib = index_of[right.source_frame_ids[0]]
        edges.append(TopoEdge(a=left.node_id, b=right.node_id, length=arc[ib] - arc[ia]))
    return TopoGraph(nodes=nodes, edges=edges)


def fuse_revisits(graph: TopoGraph, merge_radius: float = DEFAULT_MERGE_RADIUS) -> TopoGraph:
    """Merge same-kind nodes within merge_radius of each other.

    Greedy in ascending node_id, repeated until stable, so the result has no
    mergeable pair left and the operation is idempotent. A merged node takes
    the union of names and source frames and the arithmetic mean of its
    original members' positions. Parallel edges collapse to the minimum
    length; self-loops created by merging are dropped.
    """
    clusters = [
        {"ids": [n.node_id], "members": [n], "position": n.position, "kind": n.kind}
        for n in sorted(graph.nodes, key=lambda n: n.node_id)
    ]
    changed = True
    while changed:
        changed = False
        merged: list[dict] = []
        for cluster in clusters:
            target = None
            for candidate in merged:
                if candidate["kind"] != cluster["kind"]:
                    continue
                if np.linalg.norm(candidate["position"] - cluster["position"]) <= merge_radius:
                    target = candidate
                    break
            if target is None:
                merged.append(cluster)
            else:
                target["ids"].extend(cluster["ids"])
                target["members"].extend(cluster["members"])
                target["position"] = np.mean([m.position for m in target["members"]], axis=0)
                changed = True
        clusters = merged

    cluster_of: dict[int, int] = {}
    nodes = []
    for cluster in sorted(clusters, key=lambda c: min(c["ids"])):
        new_id = min(cluster["ids"])
        for old in cluster["ids"]:
            cluster_of[old] = new_id
        names = sorted({name for m in cluster["members"] for name in m.landmark_names})
        frames = sorted({fid for m in cluster["members"] for fid in m.source_frame_ids})
        nodes.append(TopoNode(
            node_id=new_id,
            kind=cluster["kind"],
            position=np.mean([m.position for m in cluster["members"]], axis=0),
            landmark_names=tuple(names),
            source_frame_ids=tuple(frames),
        ))

    best: dict[tuple[int, int], float] = {}
    for edge in graph.edges:
        a, b = cluster_of[edge.a], cluster_of[edge.b]
        if a == b:
            continue
        key = (min(a, b), max(a, b))
        if key not in best or edge.length < best[key]:
            best[key] = edge.length
    edges = [TopoEdge(a=a, b=b, length=length) for (a, b), length in sorted(best.items())]
    return TopoGraph(nodes=nodes, edges=edges)


def to_dot(graph: TopoGraph | None) -> str:
    """DOT text: node label = landmark names or "turn", edge label = length (2 dp)."""
    lines = ["graph topo {"]
    if graph is not None:
        for node in graph.nodes:
            label = ", ".join(node.landmark_names) if node.kind == LANDMARK else TURN
            label = label.replace("\\", "\\\\").replace('"', '\\"')
            lines.append(f'  n{node.node_id} [label="{label}"];')
        for edge in graph.edges:
            lines.append(f'  n{edge.a} -- n{edge.b} [label="{edge.length:.2f}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def graph_to_dict(graph: TopoGraph) -> dict:
    return {
        "nodes": [
            {
                "node_id": n.node_id,
                "kind": n.kind,
                "position": [float(x) for x in n.position],
                "landmark_names": list(n.landmark_names),
                "source_frame_ids": list(n.source_frame_ids),
            }
            for n in graph.nodes
        ],
        "edges": [
            {"nodes": [e.a, e.b], "length": float(e.length)} for e in graph.edges
        ],
    }


def graph_from_dict(data: dict) -> TopoGraph:
    try:
        nodes = [
            TopoNode(
                node_id=int(n["node_id"]),
                kind=str(n["kind"]),
                position=n["position"],
                landmark_names=tuple(n["landmark_names"]),
                source_frame_ids=tuple(int(f) for f in n["source_frame_ids"]),
            )
            for n in data["nodes"]
        ]
        edges = [
            TopoEdge(a=int(e["nodes"][0]), b=int(e["nodes"][1]), length=float(e["length"]))
            for e in data["edges"]
        ]
    except (KeyError, TypeError, IndexError) as exc:
        raise ValidationError(f"malformed topo graph document: {exc}") from exc
    return TopoGraph(nodes=nodes, edges=edges)

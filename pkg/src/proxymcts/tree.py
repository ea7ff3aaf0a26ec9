"""Search tree: node storage, UCT selection, backpropagation and restart."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Iterable

from pydantic import BaseModel, ConfigDict, Field

NodeId = int


class Status(str, Enum):
    DRAFT = "Draft"
    BUGGY = "Buggy"
    VALID = "Valid"
    INVALID = "Invalid"


class TreeError(Exception):
    pass


class UnknownNode(TreeError, KeyError):
    pass


class AllTerminal(TreeError):
    pass


class EmptyTree(TreeError):
    pass


class TreeConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    # sqrt(2) scaled by the reward range (rewards lie in [-1, 3])
    c_explore: float = Field(default=4 * math.sqrt(2.0), gt=0)
    tau_improve: int = Field(default=3, gt=0)
    tau_debug: int = Field(default=3, gt=0)
    improve_margin_t: float = 0.0
    max_depth: int = Field(default=10, gt=0)
    reseed_k: int = Field(default=3, gt=0)
    # Progressive widening: a node with n visits may hold up to
    # ceil(widen_c * n**widen_alpha) children. None keeps the plain descent
    # rule, where a visited node is only expanded again once every child is
    # terminal.
    widen_c: float | None = Field(default=1.0, gt=0)
    widen_alpha: float = Field(default=0.5, ge=0, le=1)


@dataclass
class Node:
    id: NodeId
    parent: NodeId | None
    payload: Any = None
    proxy_vector: list[float] | None = None
    aggregated_score: float | None = None
    true_score: float | None = None
    q: float = 0.0
    n: int = 0
    status: Status = Status.DRAFT
    terminal: bool = False
    debug_streak: int = 0
    stagnant_improves: int = 0
    exec_summary: str = ""
    children: list[NodeId] = field(default_factory=list)


@dataclass
class RestartReport:
    new_root: NodeId
    retained: list[NodeId]
    pruned: list[NodeId]


def uct(q: float, n: int, n_parent: int, c: float) -> float:
    """Q/N plus the exploration bonus C*sqrt(ln(N_parent)/N)."""
    return q / n + c * math.sqrt(math.log(n_parent) / n)


class SearchTree:
    """Mutable search tree; callers serialize writes."""

    def __init__(self, root_payload: Any = None, start_id: int = 0):
        self.nodes: dict[NodeId, Node] = {}
        self._next_id = start_id
        self.root = self._new_node(None, root_payload).id

    def _new_node(self, parent: NodeId | None, payload: Any) -> Node:
        node = Node(id=self._next_id, parent=parent, payload=payload)
        self._next_id += 1
        self.nodes[node.id] = node
        return node

    @property
    def next_id(self) -> NodeId:
        return self._next_id

    def __len__(self) -> int:
        return len(self.nodes)

    def __contains__(self, v: NodeId) -> bool:
        return v in self.nodes

    def get(self, v: NodeId) -> Node:
        try:
            return self.nodes[v]
        except KeyError:
            raise UnknownNode(v) from None

    def add_child(self, parent: NodeId, payload: Any = None) -> Node:
        p = self.get(parent)
        child = self._new_node(parent, payload)
        p.children.append(child.id)
        return child

    def path_to_root(self, v: NodeId) -> list[NodeId]:
        path = []
        cur: NodeId | None = v
        while cur is not None:
            path.append(cur)
            cur = self.get(cur).parent
        return path

    def depth(self, v: NodeId) -> int:
        return len(self.path_to_root(v)) - 1

    def siblings(self, v: NodeId) -> list[Node]:
        node = self.get(v)
        if node.parent is None:
            return []
        return [self.nodes[c] for c in self.get(node.parent).children if c != v]

    def descendants(self, v: NodeId) -> Iterable[Node]:
        stack = list(self.get(v).children)
        while stack:
            node = self.nodes[stack.pop()]
            yield node
            stack.extend(node.children)

    @staticmethod
    def _child_limit(node: Node, cfg: TreeConfig) -> int | None:
        if cfg.widen_c is None:
            return None
        return math.ceil(cfg.widen_c * max(node.n, 1) ** cfg.widen_alpha)

    def select(self, cfg: TreeConfig | None = None, root: NodeId | None = None) -> NodeId:
        """Descend by UCT to the node that should be expanded next.

        Unvisited children win outright (lowest id first). A node is returned
        when it has no children, has room under the widening limit, or all of
        its children are terminal.
        """
        cfg = cfg or TreeConfig()
        cur = self.get(self.root if root is None else root)
        if cur.terminal:
            raise AllTerminal(cur.id)
        while True:
            if not cur.children:
                return cur.id
            # one pass: the lowest-id unvisited child, else the best UCT (same
            # closed form as uct(), inlined because wide roots make this hot)
            log_n = math.log(max(cur.n, 1))
            unvisited: NodeId | None = None
            best: Node | None = None
            best_val = -math.inf
            for cid in cur.children:
                c = self.nodes[cid]
                if c.terminal:
                    continue
                if c.n == 0:
                    if unvisited is None or cid < unvisited:
                        unvisited = cid
                    continue
                val = c.q / c.n + cfg.c_explore * math.sqrt(log_n / c.n)
                if val > best_val or (val == best_val and cid < best.id):
                    best, best_val = c, val
            if unvisited is not None:
                return unvisited
            limit = self._child_limit(cur, cfg)
            if best is None or (limit is not None and len(cur.children) < limit):
                return cur.id
            cur = best

    def backpropagate(self, v: NodeId, reward: float) -> None:
        for u in self.path_to_root(v):
            node = self.nodes[u]
            node.q += reward
            node.n += 1

    def mark_terminal_if_needed(self, v: NodeId, cfg: TreeConfig) -> bool:
        node = self.get(v)
        if node.stagnant_improves > cfg.tau_improve or node.debug_streak > cfg.tau_debug:
            node.terminal = True
            return True
        return False

    def restart(
        self, scores: dict[NodeId, float], cfg: TreeConfig, root_payload: Any = None
    ) -> RestartReport:
        """Rebuild the tree as a fresh root over the top-k scored nodes.

        True scores outrank proxy-only aggregated scores; ties go to the
        lower id. Retained nodes lose their subtrees and visit statistics.
        """
        if len(self.nodes) <= 1:
            raise EmptyTree()
        for v, s in scores.items():
            if v in self.nodes:
                self.nodes[v].aggregated_score = s

        def rank_key(node: Node):
            if node.true_score is not None:
                return (1, node.true_score, -node.id)
            return (0, node.aggregated_score, -node.id)

        scored = [
            node
            for node in self.nodes.values()
            if node.id != self.root
            and (node.true_score is not None or node.aggregated_score is not None)
        ]
        scored.sort(key=rank_key, reverse=True)
        keep = scored[: cfg.reseed_k]

        old_ids = set(self.nodes)
        new_root = self._new_node(None, root_payload)
        retained = []
        for node in keep:
            node.parent = new_root.id
            node.children = []
            node.q, node.n = 0.0, 0
            node.terminal = False
            node.debug_streak = 0
            node.stagnant_improves = 0
            new_root.children.append(node.id)
            retained.append(node.id)
        # depth-1 reseeds always sit within max_depth; nothing deeper survives
        kept = set(retained) | {new_root.id}
        pruned = sorted(v for v in old_ids if v not in kept)
        for v in pruned:
            del self.nodes[v]
        self.root = new_root.id
        return RestartReport(new_root=new_root.id, retained=retained, pruned=pruned)

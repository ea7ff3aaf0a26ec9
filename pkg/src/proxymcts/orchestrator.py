"""Search loop: selection, expansion, verification, reward, refit and restart."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable

import numpy as np

from .agents.base import (
    BackendUnavailable,
    BuggyVerdict,
    EvaluationAgent,
    FullEvalResult,
    GenerationAgent,
    GenerationContext,
    MalformedReport,
    MalformedResponse,
    Mode,
    SandboxLimits,
    SiblingSummary,
    builtin_proxies,
)
from .config import BudgetConfig, RunConfig
from .journal import Event, Journal
from .scoring import (
    AllProxiesFailed,
    LabeledPair,
    ProxyRegistry,
    ProxySpec,
    ZeroWeightSum,
    aggregate,
    align,
    apply_calibration,
    drift_exceeded,
    fit_calibration,
)
from .tree import EmptyTree, Node, NodeId, SearchTree, Status

log = logging.getLogger(__name__)

EPS = 1e-9


class Escalation(str, Enum):
    PROXY_ONLY = "ProxyOnly"
    FULL_TRAIN = "FullTrain"
    SKIP = "Skip"


class Action(str, Enum):
    CONTINUE = "Continue"
    DRAFT_FRESH = "DraftFresh"


@dataclass
class TaskSpec:
    description: str = ""
    data_signature: dict[str, Any] = field(default_factory=dict)
    environment: str = ""
    maximize: bool = True


@dataclass
class BudgetState:
    total_units: float
    remaining_units: float
    proxy_cost: float
    full_cost: float
    wallclock_deadline: float | None = None
    proxy_mode: bool = True
    consecutive_buggy: int = 0

    @classmethod
    def from_config(cls, cfg: BudgetConfig, start: float = 0.0) -> BudgetState:
        deadline = None if cfg.wallclock_seconds is None else start + cfg.wallclock_seconds
        return cls(
            total_units=cfg.total_units,
            remaining_units=cfg.total_units,
            proxy_cost=cfg.proxy_cost,
            full_cost=cfg.full_cost,
            wallclock_deadline=deadline,
            proxy_mode=cfg.proxy_mode,
        )

    def can_afford(self, cost: float) -> bool:
        return self.remaining_units + EPS >= cost


@dataclass
class RewardInput:
    valid: bool
    was_debug: bool = False
    debug_succeeded: bool = False
    parent_score: float | None = None
    child_score: float | None = None

    def __post_init__(self):
        if self.debug_succeeded and not self.was_debug:
            raise ValueError("debug_succeeded requires was_debug")


def compute_reward(inp: RewardInput) -> float:
    if not inp.valid:
        return -1.0
    if inp.child_score is None:
        improves = False
    elif inp.parent_score is None:
        improves = True
    else:
        improves = inp.child_score > inp.parent_score
    return 1.0 + float(inp.debug_succeeded) + float(improves)


def update_proxy_mode(budget: BudgetState, cfg: BudgetConfig, now: float) -> bool:
    """Switch proxy mode off for low budget, low time, or a buggy streak. Never back on."""
    if not budget.proxy_mode:
        return False
    low_budget = budget.remaining_units < cfg.low_budget_fraction * budget.total_units
    low_time = False
    if budget.wallclock_deadline is not None:
        threshold = cfg.low_time_threshold
        if threshold is None:
            threshold = 0.2 * (cfg.wallclock_seconds or 0.0)
        low_time = budget.wallclock_deadline - now < threshold
    too_buggy = budget.consecutive_buggy > cfg.buggy_threshold
    if low_budget or low_time or too_buggy:
        budget.proxy_mode = False
    return budget.proxy_mode


def sanity_check_score(candidate: float, frontier: float, ratio_bound: float, score_floor: float) -> bool:
    """Reject scores implausibly far above the frontier in magnitude."""
    return abs(candidate) <= ratio_bound * max(abs(frontier), score_floor)


def failsafe_retry(result: FullEvalResult) -> Action:
    if result.artifact_present and result.true_score is not None:
        return Action.CONTINUE
    return Action.DRAFT_FRESH


def escalation_policy(
    v: Node,
    budget: BudgetState,
    best_aggregated: float | None = None,
    n_scored: int = 0,
    min_scored: int = 0,
) -> Escalation:
    """Decide how to verify ``v``.

    With proxy mode off every candidate goes to full training. Otherwise a
    proxy-scored node is escalated when it beats every other aggregated score
    seen so far, which harvests labeled pairs at the search frontier. Nothing
    is escalated until ``min_scored`` nodes, ``v`` included, hold a valid
    proxy score.
    """
    if not budget.proxy_mode:
        return Escalation.FULL_TRAIN if budget.can_afford(budget.full_cost) else Escalation.SKIP
    s = v.aggregated_score
    if (
        s is not None
        and v.status is Status.VALID
        and v.true_score is None
        and n_scored >= min_scored
        and (best_aggregated is None or s > best_aggregated)
        and budget.can_afford(budget.full_cost)
    ):
        return Escalation.FULL_TRAIN
    if budget.can_afford(budget.proxy_cost):
        return Escalation.PROXY_ONLY
    return Escalation.SKIP


def action_for(node: Node, is_root: bool) -> Mode:
    if is_root:
        return Mode.DRAFT
    if node.status in (Status.BUGGY, Status.INVALID):
        return Mode.DEBUG
    return Mode.IMPROVE


@dataclass
class RunResult:
    best_node: NodeId | None
    best_true_score: float | None
    best_aggregated_score: float | None
    no_valid_candidate: bool
    stop_reason: str
    root: NodeId
    weight_history: list[dict]
    budget: dict
    budget_ledger: list[dict]
    final_tree: dict[int, dict]
    n_proxy_evals: int
    n_full_evals: int
    n_restarts: int
    n_journal_entries: int
    best_payload: dict | None = None

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}


class SimClock:
    """Deterministic clock advanced by charged compute."""

    def __init__(self, seconds_per_unit: float):
        self.seconds_per_unit = seconds_per_unit
        self.now = 0.0

    def __call__(self) -> float:
        return self.now

    def advance(self, units: float) -> None:
        self.now += units * self.seconds_per_unit


class WallClock:
    def __init__(self):
        self._t0 = time.monotonic()

    def __call__(self) -> float:
        return time.monotonic() - self._t0

    def advance(self, units: float) -> None:
        pass


def make_registry(cfg: RunConfig) -> ProxyRegistry:
    if cfg.registry.proxies is None:
        specs = builtin_proxies()
    else:
        specs = [ProxySpec(**p) for p in cfg.registry.proxies]
    reg = ProxyRegistry(specs, sentinel=cfg.registry.sentinel, max_proxies=cfg.registry.max_proxies)
    if reg.weights.sum() <= 0:
        reg.uniform_fallback()
    return reg


class Orchestrator:
    """Owns the tree, registry, budget and journal for one search run."""

    def __init__(
        self,
        cfg: RunConfig,
        generator: GenerationAgent,
        evaluator: EvaluationAgent,
        task: TaskSpec | None = None,
        journal: Journal | None = None,
        clock: Callable[[], float] | None = None,
        registry: ProxyRegistry | None = None,
    ):
        self.cfg = cfg
        self.generator = generator
        self.evaluator = evaluator
        self.task = task or TaskSpec(
            cfg.task.description, dict(cfg.task.data_signature), cfg.task.environment, cfg.task.maximize
        )
        self.clock = clock or SimClock(cfg.budget.seconds_per_unit)
        self.journal = journal if journal is not None else Journal()
        if self.journal.clock is None:
            self.journal.clock = self.clock
        self.registry = registry or make_registry(cfg)
        self.budget = BudgetState.from_config(cfg.budget, start=self.clock())
        sb = cfg.agents.sandbox
        self.limits = SandboxLimits(sb.wall, sb.max_stdout_bytes, sb.workdir_quota_bytes, sb.probe_timeout)

        self.tree = SearchTree()
        self.archive: dict[NodeId, Node] = {}
        self.pairs: list[LabeledPair] = []
        self.weight_history: list[dict] = []
        self.ledger: list[dict] = []
        self.n_proxy_evals = 0
        self.n_full_evals = 0
        self.n_restarts = 0
        self.fresh_draft = False
        self.modes: dict[NodeId, Mode] = {}
        self._lead: Node | None = None
        self._runner_up: float | None = None
        self._escalated: set[NodeId] = set()
        self._batch: list[Node] = []
        self._frontier_true: float | None = None
        self._memory: list[Node] = []
        self._scored: set[NodeId] = set()

        root = self.tree.get(self.tree.root)
        self.archive[root.id] = root
        self.journal.append(
            root.id, Event.CREATED, parent=None, root=True,
            config=cfg.model_dump(mode="json", exclude={"out"}),
        )
        self._record_weights("initial")

    # -- bookkeeping -------------------------------------------------------

    def _record_weights(self, reason: str) -> None:
        self.weight_history.append(
            {"seq": len(self.journal), "reason": reason, "names": self.registry.names,
             "weights": self.registry.weights.tolist()}
        )

    def _charge(self, node: NodeId, kind: str, cost: float) -> None:
        self.budget.remaining_units = max(0.0, self.budget.remaining_units - cost)
        if hasattr(self.clock, "advance"):
            self.clock.advance(cost)
        entry = self.journal.append(
            node, Event.BUDGET_CHARGED, kind=kind, cost=cost, remaining=self.budget.remaining_units
        )
        self.ledger.append({"seq": entry["seq"], "node": node, "kind": kind, "cost": cost,
                            "remaining": self.budget.remaining_units})

    def _aggregate(self, vector: list[float]) -> float | None:
        try:
            return aggregate(vector, self.registry)
        except ZeroWeightSum:
            self.registry.uniform_fallback()
            self._record_weights("uniform-fallback")
            return aggregate(vector, self.registry)

    # Running frontier values, folded in once a child is fully scored and
    # rebuilt after a restart rescales every aggregated score.

    @staticmethod
    def _memory_key(n: Node):
        if n.true_score is not None:
            return (1, n.true_score, -n.id)
        return (0, n.aggregated_score, -n.id)

    def _absorb(self, node: Node) -> None:
        s = node.aggregated_score
        if s is not None and node.status is Status.VALID and node.id not in self._scored:
            self._scored.add(node.id)
            lead = self._lead
            if lead is None or (s, -node.id) > (lead.aggregated_score, -lead.id):
                if lead is not None:
                    self._runner_up = lead.aggregated_score
                self._lead = node
            elif self._runner_up is None or s > self._runner_up:
                self._runner_up = s
        t = node.true_score
        if t is not None and (self._frontier_true is None or t > self._frontier_true):
            self._frontier_true = t
        if node.payload is not None and (t is not None or s is not None):
            top = [m for m in self._memory if m.id != node.id] + [node]
            top.sort(key=self._memory_key, reverse=True)
            self._memory = top[: self.cfg.search.memory_top]

    def _rebuild_frontier(self) -> None:
        self._lead = self._runner_up = self._frontier_true = None
        self._batch = []
        self._memory = []
        self._scored = set()
        for node in self.archive.values():
            self._absorb(node)

    def _best_aggregated(self) -> float | None:
        return None if self._lead is None else self._lead.aggregated_score

    def _best_true(self) -> float | None:
        return self._frontier_true

    def _deadline_passed(self) -> bool:
        d = self.budget.wallclock_deadline
        return d is not None and self.clock() >= d

    # -- context -----------------------------------------------------------

    def _summary(self, node: Node) -> SiblingSummary:
        score = node.true_score if node.true_score is not None else node.aggregated_score
        plan = node.payload.plan if node.payload is not None else ""
        return SiblingSummary(node.id, plan, score)

    def build_context(self, v: NodeId, mode: Mode) -> GenerationContext:
        node = self.tree.get(v)
        cap = self.cfg.search.context_chars
        if self.n_restarts > 0:
            cap = int(cap * self.cfg.search.restart_context_factor)
        named = [self.tree.nodes[c] for c in node.children if self.tree.nodes[c].payload is not None]
        k = self.cfg.search.sibling_summaries
        recent = named[-k:] if k else []
        ctx = GenerationContext(
            mode=mode,
            task_description=self.task.description,
            data_signature=dict(self.task.data_signature),
            environment=self.task.environment,
            remaining_budget=self.budget.remaining_units,
            siblings=[self._summary(c) for c in recent],
            sibling_hashes=[c.payload.hash for c in named],
            memory=[self._summary(n) for n in self._memory],
            summary_cap=cap,
        )
        if mode is not Mode.DRAFT and node.payload is not None:
            ctx.parent_plan = node.payload.plan
            ctx.parent_script = node.payload.script
            ctx.parent_hash = node.payload.hash
            ctx.parent_meta = dict(node.payload.meta)
            ctx.execution_result = node.exec_summary
        return ctx

    # -- scoring of a new child -------------------------------------------

    def _reference_scores(self, child: Node) -> tuple[float | None, float | None]:
        """(parent_score, child_score) of the same kind for the improvement test."""
        ancestors = [self.tree.nodes[u] for u in self.tree.path_to_root(child.id)[1:]]
        ancestors = [a for a in ancestors if a.payload is not None]
        ref = next((a for a in ancestors if a.true_score is not None or a.aggregated_score is not None), None)
        if ref is None:
            score = child.true_score if child.true_score is not None else child.aggregated_score
            return None, score
        if ref.true_score is not None and child.true_score is not None:
            return ref.true_score, child.true_score
        if ref.aggregated_score is not None and child.aggregated_score is not None:
            return ref.aggregated_score, child.aggregated_score
        for kind in ("true_score", "aggregated_score"):
            cs = getattr(child, kind)
            if cs is None:
                continue
            anc = next((a for a in ancestors if getattr(a, kind) is not None), None)
            return (getattr(anc, kind) if anc else None), cs
        return None, None

    def _proxy_verify(self, child: Node) -> None:
        self._charge(child.id, "proxy", self.budget.proxy_cost)
        self.n_proxy_evals += 1
        res = self.evaluator.run_proxy(child.payload, self.registry, self.limits, node_id=child.id)
        if isinstance(res, BuggyVerdict):
            child.status = Status.BUGGY
            child.exec_summary = res.stderr[-2000:]
            self.journal.append(child.id, Event.PROXY_EVALUATED, buggy=True, stderr=res.stderr[-500:],
                                aggregated_score=None)
            return
        if isinstance(res, MalformedReport):
            child.status = Status.INVALID
            child.exec_summary = f"proxy output unusable: {res.reason}"
            self.journal.append(child.id, Event.PROXY_EVALUATED, malformed=res.reason,
                                aggregated_score=None)
            return
        vector = [res.scores[name] for name in self.registry.names]
        aligned = align(vector, self.registry)
        child.proxy_vector = vector
        s = self._aggregate(vector)
        raw = s
        if s is not None:
            frontier = self._best_aggregated()
            if frontier is not None and not sanity_check_score(
                s, frontier, self.cfg.budget.ratio_bound, self.cfg.budget.score_floor
            ):
                s = None
        child.aggregated_score = s
        child.status = Status.VALID if s is not None else Status.INVALID
        child.exec_summary = f"proxy scores {res.raw_stdout_line}"
        self.journal.append(
            child.id, Event.PROXY_EVALUATED, proxy_vector=vector, aligned=aligned,
            aggregated_score=s, raw_score=raw, weights=self.registry.weights.tolist(),
        )

    def _full_verify(self, child: Node) -> Action:
        self._charge(child.id, "full", self.budget.full_cost)
        self.n_full_evals += 1
        res = self.evaluator.run_full(child.payload, self.limits, node_id=child.id)
        y = res.true_score
        if y is not None:
            frontier = self._best_true()
            if frontier is not None and not sanity_check_score(
                y, frontier, self.cfg.budget.ratio_bound, self.cfg.budget.score_floor
            ):
                y = None
        child.true_score = y
        if res.exit_status != 0:
            child.status = Status.BUGGY
        elif y is None:
            child.status = Status.INVALID
        else:
            child.status = Status.VALID
        child.exec_summary = res.logs[-2000:]
        self.journal.append(
            child.id, Event.FULL_EVALUATED, true_score=y, reported_score=res.true_score,
            artifact_present=res.artifact_present, exit_status=res.exit_status,
        )
        if y is not None and child.proxy_vector is not None:
            x_aligned = [
                v if self.registry.is_sentinel(v) else spec.direction * v
                for v, spec in zip(child.proxy_vector, self.registry.proxies)
            ]
            self.pairs.append(LabeledPair(x_aligned, y if self.task.maximize else -y))
            self._maybe_refit()
        return failsafe_retry(res)

    def _escalate(self, node: Node) -> Action:
        self._escalated.add(node.id)
        self._batch = []
        return self._verify_full(node)

    def _verify_full(self, node: Node) -> Action:
        action = self._full_verify(node)
        if node.id in self._scored and node.status is not Status.VALID:
            self._rebuild_frontier()
        else:
            self._absorb(node)
        return action

    # -- refit and restart -------------------------------------------------

    def _maybe_refit(self) -> None:
        if len(self.pairs) < self.cfg.fit.min_pairs_k:
            return
        try:
            cal = fit_calibration(self.pairs, self.registry, self.cfg.fit)
        except AllProxiesFailed:
            if self.budget.proxy_mode:
                self.budget.proxy_mode = False
                self.journal.append(None, Event.PROXY_MODE_TOGGLED, proxy_mode=False,
                                    reason="all proxies failed")
            return
        old = self.registry.weights
        drifted = drift_exceeded(old, cal.weights, self.cfg.fit.epsilon)
        self.journal.append(
            None, Event.WEIGHTS_REFIT, old=old.tolist(), new=cal.weights.tolist(),
            ridge=cal.ridge_solution.tolist(), l1=float(np.abs(cal.weights - old).sum()),
            drift_exceeded=drifted, n_pairs=len(self.pairs),
        )
        if not drifted:
            return
        apply_calibration(self.registry, cal)
        self._record_weights("refit")
        if self.cfg.search.restarts:
            self.restart()

    def restart(self) -> None:
        scores: dict[NodeId, float | None] = {}
        for node in self.archive.values():
            if node.proxy_vector is not None:
                scores[node.id] = node.aggregated_score = self._aggregate(node.proxy_vector)
        try:
            report = self.tree.restart(
                {v: s for v, s in scores.items() if v in self.tree and s is not None}, self.cfg.tree
            )
        except EmptyTree:
            return
        new_root = self.tree.get(report.new_root)
        self.archive[new_root.id] = new_root
        self.journal.append(new_root.id, Event.CREATED, parent=None, root=True)
        self.journal.append(
            new_root.id, Event.RESTART, new_root=new_root.id, retained=report.retained,
            pruned=report.pruned, scores={str(k): v for k, v in scores.items()},
        )
        self.n_restarts += 1
        self._rebuild_frontier()

    # -- main loop -----------------------------------------------------------

    def _set_mode(self) -> None:
        was = self.budget.proxy_mode
        now = update_proxy_mode(self.budget, self.cfg.budget, self.clock())
        if was and not now:
            self.journal.append(None, Event.PROXY_MODE_TOGGLED, proxy_mode=False,
                                remaining=self.budget.remaining_units,
                                consecutive_buggy=self.budget.consecutive_buggy)

    def step(self) -> str | None:
        """One select-expand-verify-backpropagate round; returns a stop reason or None."""
        self._set_mode()
        need = self.budget.proxy_cost if self.budget.proxy_mode else self.budget.full_cost
        if not self.budget.can_afford(need):
            return "budget exhausted"
        if self._deadline_passed():
            return "deadline reached"

        lead = self._lead
        if not self.budget.proxy_mode and lead is not None and lead.id not in self._escalated:
            # proxy mode has ended: the best proxy-scored candidate still gets its full run
            if escalation_policy(lead, self.budget) is Escalation.FULL_TRAIN and lead.true_score is None:
                if self._escalate(lead) is Action.DRAFT_FRESH:
                    self.fresh_draft = True
                return None

        if self.fresh_draft:
            target, mode = self.tree.root, Mode.DRAFT
            self.fresh_draft = False
        else:
            target = self.tree.select(self.cfg.tree)
            mode = action_for(self.tree.get(target), target == self.tree.root)
        ctx = self.build_context(target, mode)
        try:
            payload = self.generator.generate(ctx)
        except MalformedResponse as exc:
            log.warning("generation failed: %s", exc)
            return None
        except BackendUnavailable as exc:
            log.error("generation backend unavailable: %s", exc)
            return f"backend unavailable: {exc}"

        parent = self.tree.get(target)
        child = self.tree.add_child(target, payload)
        self.archive[child.id] = child
        self.modes[child.id] = mode
        self.journal.append(
            child.id, Event.CREATED, parent=target, mode=mode.value, plan=payload.plan,
            code_hash=payload.hash, meta=payload.meta,
        )

        action = Action.CONTINUE
        restarts_before = self.n_restarts
        probe = self.evaluator.probe(payload, self.limits)
        if probe is not None:
            child.status = Status.BUGGY
            child.exec_summary = probe.stderr
        elif self.budget.proxy_mode:
            self._proxy_verify(child)
            self._absorb(child)
            # the frontier node may be an earlier candidate that was scored
            # before enough proxy readings existed to trust it
            if child.id in self._scored:
                self._batch.append(child)
            lead = self._lead
            escalated = False
            if lead is not None and lead.id not in self._escalated:
                decision = escalation_policy(
                    lead, self.budget, self._runner_up,
                    len(self._scored), self.cfg.budget.escalate_after,
                )
                if decision is Escalation.FULL_TRAIN:
                    escalated = True
                    action = self._escalate(lead)
            every = self.cfg.budget.harvest_every
            if not escalated and every is not None and len(self._batch) >= every:
                # periodic labels keep the weight fit current even when no
                # candidate beats the all-time frontier
                pick = max(
                    (n for n in self._batch if n.id not in self._escalated and n.status is Status.VALID),
                    key=lambda n: (n.aggregated_score, -n.id), default=None,
                )
                self._batch = []
                if pick is not None and escalation_policy(
                    pick, self.budget, None, len(self._scored), self.cfg.budget.escalate_after
                ) is Escalation.FULL_TRAIN:
                    action = self._escalate(pick)
        else:
            action = self._verify_full(child)
        if action is Action.DRAFT_FRESH:
            self.fresh_draft = True

        if child.status is Status.BUGGY:
            self.budget.consecutive_buggy += 1
        else:
            self.budget.consecutive_buggy = 0

        self._absorb(child)
        # a restart triggered by this child's label already reset the statistics
        # and may have pruned the child itself
        if self.n_restarts != restarts_before:
            return None

        valid = child.status is Status.VALID
        ps, cs = self._reference_scores(child)
        reward = compute_reward(
            RewardInput(valid=valid, was_debug=mode is Mode.DEBUG,
                        debug_succeeded=mode is Mode.DEBUG and valid,
                        parent_score=ps, child_score=cs)
        )
        if mode is Mode.IMPROVE:
            improved = valid and cs is not None and (ps is None or cs - ps > self.cfg.tree.improve_margin_t)
            if not improved:
                parent.stagnant_improves += 1
        if mode is Mode.DEBUG:
            if valid:
                parent.debug_streak = 0
            else:
                parent.debug_streak += 1
                child.debug_streak = parent.debug_streak

        self.tree.backpropagate(child.id, reward)
        self.journal.append(child.id, Event.REWARDED, reward=reward,
                            parent_score=ps, child_score=cs)
        for nid in (parent.id, child.id):
            if nid != self.tree.root and not self.tree.get(nid).terminal:
                if self.tree.mark_terminal_if_needed(nid, self.cfg.tree):
                    self.journal.append(nid, Event.MARKED_TERMINAL)
        return None

    def run(self) -> RunResult:
        stop = "iteration limit"
        for _ in range(self.cfg.search.max_iterations):
            reason = self.step()
            if reason is not None:
                stop = reason
                break
        self.journal.close()
        return self.result(stop)

    def best_node(self) -> Node | None:
        scored = [n for n in self.archive.values() if n.payload is not None]
        with_true = [n for n in scored if n.true_score is not None]
        if with_true:
            return max(with_true, key=lambda n: (n.true_score, -n.id))
        with_s = [n for n in scored if n.aggregated_score is not None and n.status is Status.VALID]
        if with_s:
            return max(with_s, key=lambda n: (n.aggregated_score, -n.id))
        return None

    def result(self, stop_reason: str) -> RunResult:
        best = self.best_node()
        final_tree = {
            n.id: {
                "parent": n.parent, "q": n.q, "n": n.n, "status": n.status.value,
                "terminal": n.terminal, "aggregated_score": n.aggregated_score,
                "true_score": n.true_score,
            }
            for n in sorted(self.tree.nodes.values(), key=lambda n: n.id)
        }
        spent = self.budget.total_units - self.budget.remaining_units
        return RunResult(
            best_node=None if best is None else best.id,
            best_true_score=None if best is None else best.true_score,
            best_aggregated_score=None if best is None else best.aggregated_score,
            no_valid_candidate=best is None,
            stop_reason=stop_reason,
            root=self.tree.root,
            weight_history=self.weight_history,
            budget={"total": self.budget.total_units, "spent": spent,
                    "remaining": self.budget.remaining_units,
                    "proxy_mode": self.budget.proxy_mode},
            budget_ledger=self.ledger,
            final_tree=final_tree,
            n_proxy_evals=self.n_proxy_evals,
            n_full_evals=self.n_full_evals,
            n_restarts=self.n_restarts,
            n_journal_entries=len(self.journal),
            best_payload=None if best is None else best.payload.to_dict(),
        )


def run_search(
    task: TaskSpec | None,
    cfg: RunConfig,
    generator: GenerationAgent,
    evaluator: EvaluationAgent,
    journal: Journal | None = None,
    clock: Callable[[], float] | None = None,
) -> tuple[RunResult, Orchestrator]:
    orch = Orchestrator(cfg, generator, evaluator, task=task, journal=journal, clock=clock)
    return orch.run(), orch

"""Minimum vertex cover seen two ways.

View A is sequential vertex selection on the graph (reward -1 per vertex,
terminal once the selection covers every edge). View B is node selection in
a branch-and-bound search over the ILP

    max -sum_v x_v   s.t.  x_u + x_v >= 1 for every edge,  x in {0,1}^n

where expanding a node pays (new incumbent objective - old incumbent
objective) whenever it produces a better integral solution, and 0 otherwise.
The incumbent starts at the sentinel objective 0, so the rewards of a search
telescope to its final incumbent objective, i.e. minus the cover size, and
match the graph view exactly.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import (IncompleteTrajectoryError, MDPSpec, Observation, Step, Trajectory,
                   TwoViewInstance, UnmappableTrajectoryError, ViewMapping)
from .lp import GE, INFEASIBLE, LPProblem, LPSolution, solve_lp

INT_TOL = 1e-6
SENTINEL = 0.0
DEFAULT_BUDGET = 500

OPEN, EXPANDED, PRUNED, LEAF, INFEAS = "open", "expanded", "pruned", "integral-leaf", "infeasible"


# --------------------------------------------------------------------------- graphs

@dataclass(frozen=True)
class Graph:
    n: int
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        seen = set()
        norm = []
        for u, v in self.edges:
            u, v = int(u), int(v)
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u}, {v}) outside [0, {self.n})")
            e = (min(u, v), max(u, v))
            if e in seen:
                raise ValueError(f"duplicate edge {e}")
            seen.add(e)
            norm.append(e)
        object.__setattr__(self, "edges", tuple(norm))
        adj = [[] for _ in range(self.n)]
        for u, v in norm:
            adj[u].append(v)
            adj[v].append(u)
        object.__setattr__(self, "_adj", tuple(tuple(sorted(a)) for a in adj))

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self._adj[v]

    def degree(self, v: int) -> int:
        return len(self._adj[v])

    def is_cover(self, vertices) -> bool:
        s = set(vertices)
        return all(u in s or v in s for u, v in self.edges)

    def dumps(self) -> str:
        return f"p {self.n} {len(self.edges)}\n" + "".join(f"e {u} {v}\n" for u, v in self.edges)

    @classmethod
    def loads(cls, text: str) -> "Graph":
        n = None
        edges = []
        for line in text.splitlines():
            parts = line.split()
            if not parts:
                continue
            if parts[0] == "p":
                n, m = int(parts[1]), int(parts[2])
            elif parts[0] == "e":
                edges.append((int(parts[1]), int(parts[2])))
            else:
                raise ValueError(f"unrecognised graph line {line!r}")
        if n is None:
            raise ValueError("graph file lacks a 'p' header")
        if len(edges) != m:
            raise ValueError(f"header promises {m} edges, found {len(edges)}")
        return cls(n, tuple(edges))

    def write(self, path) -> None:
        Path(path).write_text(self.dumps())

    @classmethod
    def read(cls, path) -> "Graph":
        return cls.loads(Path(path).read_text())


# five-vertex example graph; minimum covers have 3 vertices, e.g. {1, 2, 3} (0-indexed)
EXAMPLE_GRAPH = Graph(5, ((0, 1), (1, 2), (2, 3), (2, 4), (3, 4)))


def generate_er_graph(n: int, p: float, seed) -> Graph:
    if n < 1:
        raise ValueError("n must be positive")
    if not 0.0 <= p <= 1.0:
        raise ValueError("p must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    keep = rng.random(len(pairs)) < p
    return Graph(n, tuple(e for e, k in zip(pairs, keep) if k))


def brute_force_min_cover(g: Graph) -> int:
    for size in range(g.n + 1):
        for subset in itertools.combinations(range(g.n), size):
            if g.is_cover(subset):
                return size
    return g.n


# ----------------------------------------------------------------------- graph view

@dataclass(frozen=True)
class GraphState:
    graph: Graph
    selected: frozenset = frozenset()

    @property
    def terminal(self) -> bool:
        return self.graph.is_cover(self.selected)

    def legal_actions(self) -> tuple[int, ...]:
        if self.terminal:
            return ()
        return tuple(v for v in range(self.graph.n) if v not in self.selected)


def graph_step(state: GraphState, vertex: int) -> tuple[GraphState, float, bool]:
    if state.terminal:
        raise ValueError("state is already a cover")
    if vertex in state.selected or not 0 <= vertex < state.graph.n:
        raise ValueError(f"vertex {vertex} is not a legal action")
    nxt = GraphState(state.graph, state.selected | {vertex})
    return nxt, -1.0, nxt.terminal


GRAPH_FEATURES = 7


def graph_features(state: GraphState) -> Observation:
    """One row per unselected vertex.

    Columns: degree/n, uncovered incident edges/n, uncovered/max uncovered,
    covers a residual pendant edge, has no uncovered edge, fraction of
    vertices selected, fraction of neighbours selected.
    """
    g, sel = state.graph, state.selected
    n = g.n
    actions = state.legal_actions()
    uncovered = np.array([sum(1 for u in g.neighbors(v) if u not in sel) for v in range(n)],
                         dtype=float)
    top = max((uncovered[v] for v in actions), default=0.0)
    pendant_cover = np.zeros(n)
    for v in range(n):
        if v not in sel and uncovered[v] == 1:
            (u,) = [w for w in g.neighbors(v) if w not in sel]
            pendant_cover[u] = 1.0
    rows = []
    for v in actions:
        deg = g.degree(v)
        rows.append([
            deg / n,
            uncovered[v] / n,
            uncovered[v] / top if top > 0 else 0.0,
            pendant_cover[v],
            1.0 if uncovered[v] == 0 else 0.0,
            len(sel) / n,
            (deg - uncovered[v]) / deg if deg else 0.0,
        ])
    return Observation(np.array(rows, dtype=float).reshape(len(actions), GRAPH_FEATURES), actions)


class GraphEnv:
    def __init__(self, graph: Graph, gamma: float = 1.0):
        self.graph = graph
        self.spec = MDPSpec("A", gamma, max(graph.n, 1), lambda s: s.terminal)

    def reset(self, rng=None) -> GraphState:
        return GraphState(self.graph)

    def token(self, state: GraphState):
        return tuple(sorted(state.selected))

    def observe(self, state: GraphState) -> Observation:
        return graph_features(state)

    def step(self, state, action, rng=None):
        return graph_step(state, action)

    def is_terminal(self, state: GraphState) -> bool:
        return state.terminal

    def info(self, state: GraphState) -> dict:
        return {"cover": tuple(sorted(state.selected)), "solved": state.terminal}


# ------------------------------------------------------------------------- ILP view

@dataclass
class ILPInstance:
    graph: Graph
    lp: LPProblem
    integer: np.ndarray


def build_ilp(g: Graph) -> ILPInstance:
    A = np.zeros((len(g.edges), g.n))
    for i, (u, v) in enumerate(g.edges):
        A[i, u] = A[i, v] = 1.0
    lp = LPProblem(-np.ones(g.n), A, [GE] * len(g.edges), np.ones(len(g.edges)),
                   np.zeros(g.n), np.ones(g.n))
    return ILPInstance(g, lp, np.ones(g.n, dtype=bool))


@dataclass
class BnBNode:
    node_id: int
    parent: int | None
    depth: int
    fixings: tuple[tuple[int, int], ...]
    lower: np.ndarray
    upper: np.ndarray
    lp: LPSolution
    status: str = OPEN
    branch_var: int | None = None
    fractionality: float = 0.0
    n_fractional: int = 0

    @property
    def bound(self) -> float:
        return self.lp.objective

    @property
    def integral(self) -> bool:
        return self.lp.status != INFEASIBLE and self.branch_var is None


def _most_fractional(x: np.ndarray, integer: np.ndarray) -> tuple[int | None, float, int]:
    frac = np.abs(x - np.round(x))
    frac[~integer] = 0.0
    fractional = frac > INT_TOL
    if not fractional.any():
        return None, 0.0, 0
    # argmax picks the lowest index among equally fractional variables
    v = int(np.argmax(frac))
    return v, float(frac[v]), int(fractional.sum())


class BnBTree:
    """Mutable search state; the ILP view's MDP state."""

    def __init__(self, ilp: ILPInstance, budget: int | None = DEFAULT_BUDGET):
        self.ilp = ilp
        self.budget = budget
        self.nodes: dict[int, BnBNode] = {}
        self.open: list[int] = []
        self.incumbent_obj = SENTINEL
        self.incumbent_x: np.ndarray | None = None
        self.expanded = 0
        self.reward_log: list[float] = []
        self._add_node(None, 0, (), ilp.lp.lower.copy(), ilp.lp.upper.copy())

    @property
    def has_incumbent(self) -> bool:
        return self.incumbent_x is not None

    @property
    def done(self) -> bool:
        return not self.open or (self.budget is not None and self.expanded >= self.budget)

    def best_bound(self) -> float:
        if not self.open:
            return self.incumbent_obj
        return max(self.nodes[i].bound for i in self.open)

    def _dominated(self, bound: float) -> bool:
        return self.has_incumbent and bound <= self.incumbent_obj

    def _add_node(self, parent, depth, fixings, lower, upper) -> BnBNode:
        sol = solve_lp(self.ilp.lp.with_bounds(lower, upper))
        node = BnBNode(len(self.nodes), parent, depth, fixings, lower, upper, sol)
        if sol.status == INFEASIBLE:
            node.status = INFEAS
        else:
            node.branch_var, node.fractionality, node.n_fractional = _most_fractional(
                sol.x, self.ilp.integer)
            node.status = PRUNED if self._dominated(sol.objective) else OPEN
        self.nodes[node.node_id] = node
        if node.status == OPEN:
            self.open.append(node.node_id)
        return node

    def _branch(self, node: BnBNode, var: int) -> None:
        if node.lower[var] == node.upper[var]:
            raise ValueError(f"variable {var} is already fixed at node {node.node_id}")
        for value in (0, 1):
            lower, upper = node.lower.copy(), node.upper.copy()
            lower[var] = upper[var] = value
            fixings = tuple(sorted(node.fixings + ((var, value),)))
            self._add_node(node.node_id, node.depth + 1, fixings, lower, upper)

    def _set_incumbent(self, x: np.ndarray, obj: float) -> float:
        reward = obj - self.incumbent_obj
        self.incumbent_obj = obj
        self.incumbent_x = x
        for i in list(self.open):
            if self.nodes[i].bound <= obj:
                self.nodes[i].status = PRUNED
                self.open.remove(i)
        return reward

    def node_by_fixings(self, fixings) -> int:
        for i in self.open:
            if self.nodes[i].fixings == fixings:
                return i
        raise KeyError(f"no open node with fixings {fixings}")


def bnb_expand(tree: BnBTree, node_id: int, force_branch: int | None = None
               ) -> tuple[float, bool]:
    """Expand an open node; returns (reward, done).

    ``force_branch`` branches on the given unfixed variable even when the
    node's relaxation is integral. Only trajectory mappings use it, to steer
    a dive towards a prescribed assignment.
    """
    if tree.done:
        raise ValueError("search is finished")
    node = tree.nodes.get(node_id)
    if node is None or node.status != OPEN:
        raise ValueError(f"node {node_id} is not open")
    tree.open.remove(node_id)
    tree.expanded += 1
    reward = 0.0
    if tree._dominated(node.bound):
        node.status = PRUNED
    elif force_branch is not None:
        node.status = EXPANDED
        tree._branch(node, force_branch)
    elif node.integral:
        x = np.round(node.lp.x)
        obj = float(tree.ilp.lp.c @ x)
        if not tree.has_incumbent or obj > tree.incumbent_obj:
            node.status = LEAF
            reward = tree._set_incumbent(x, obj)
        else:
            node.status = PRUNED
    else:
        node.status = EXPANDED
        tree._branch(node, node.branch_var)
    tree.reward_log.append(reward)
    return reward, tree.done


NODE_FEATURES = 11


def bnb_node_features(tree: BnBTree, node_id: int) -> np.ndarray:
    """Feature vector of one node.

    0 LP objective, 1 depth, 2 fractionality of the branching variable
    (2*min(f, 1-f)), 3 incumbent objective (sentinel 0 before any), 4 best
    open LP bound, 5 gap = best bound - incumbent, 6 fraction of the node
    budget used, 7 LP solution integral, 8 number of fractional variables,
    9 LP objective - best open bound, 10 incumbent exists. Objective-valued
    and count-valued entries are divided by the number of variables.
    """
    node = tree.nodes[node_id]
    if node.lp.status != "optimal":
        raise ValueError(f"node {node_id} has no solved relaxation")
    n = max(tree.ilp.lp.n_vars, 1)
    best = tree.best_bound()
    used = tree.expanded / tree.budget if tree.budget else 0.0
    return np.array([
        node.bound / n,
        node.depth / n,
        2.0 * node.fractionality,
        tree.incumbent_obj / n,
        best / n,
        (best - tree.incumbent_obj) / n,
        used,
        1.0 if node.integral else 0.0,
        node.n_fractional / n,
        (node.bound - best) / n,
        1.0 if tree.has_incumbent else 0.0,
    ])


class ILPEnv:
    def __init__(self, graph: Graph, budget: int | None = DEFAULT_BUDGET, gamma: float = 1.0):
        self.graph = graph
        self.ilp = build_ilp(graph)
        self.budget = budget
        cap = max(budget, 1) if budget is not None else 10 ** 9
        self.spec = MDPSpec("B", gamma, cap, lambda t: t.done)
        self._root: BnBTree | None = None

    def reset(self, rng=None) -> BnBTree:
        return BnBTree(self.ilp, self.budget)

    def token(self, tree: BnBTree):
        open_sig = tuple(sorted(tree.nodes[i].fixings for i in tree.open))
        return (open_sig, tree.incumbent_obj, tree.has_incumbent, tree.expanded)

    def observe(self, tree: BnBTree) -> Observation:
        rows = [bnb_node_features(tree, i) for i in tree.open]
        actions = tuple(tree.nodes[i].fixings for i in tree.open)
        return Observation(np.array(rows).reshape(len(rows), NODE_FEATURES), actions)

    def step(self, tree: BnBTree, action, rng=None):
        reward, done = bnb_expand(tree, tree.node_by_fixings(action))
        return tree, reward, done

    def is_terminal(self, tree: BnBTree) -> bool:
        return tree.done

    def info(self, tree: BnBTree) -> dict:
        x = None if tree.incumbent_x is None else tuple(int(v) for v in tree.incumbent_x)
        return {"incumbent": x, "objective": tree.incumbent_obj, "expanded": tree.expanded,
                "solved": tree.has_incumbent}


# ----------------------------------------------------------------- solution mapping

def map_solution(direction: str, value, graph: Graph):
    """ILP assignment <-> vertex cover (0-indexed vertex sets)."""
    if direction in ("B->A", "ilp->graph"):
        x = np.asarray(value)
        if x.shape != (graph.n,) or not np.all((x == 0) | (x == 1)):
            raise ValueError("assignment must be a 0/1 vector with one entry per vertex")
        cover = frozenset(int(v) for v in np.flatnonzero(x))
        if not graph.is_cover(cover):
            raise ValueError("assignment violates an edge constraint")
        return cover
    if direction in ("A->B", "graph->ilp"):
        cover = frozenset(int(v) for v in value)
        if not graph.is_cover(cover) or any(not 0 <= v < graph.n for v in cover):
            raise ValueError("vertex set is not a cover")
        x = np.zeros(graph.n, dtype=int)
        x[sorted(cover)] = 1
        return x
    raise ValueError(f"unknown direction {direction!r}")


def cover_order(graph: Graph, cover) -> list[int]:
    """Ascending order, except that a vertex whose removal uncovers an edge goes last.

    Every proper prefix of the returned order is then a non-cover, so the
    graph view selects exactly ``len(cover)`` vertices before terminating.
    """
    cover = sorted(set(cover))
    if not graph.edges:
        return []
    essential = [v for v in cover if not graph.is_cover(set(cover) - {v})]
    if not essential:
        raise ValueError("every vertex of this cover is redundant; no graph trajectory "
                         "of matching length exists")
    last = essential[-1]
    return [v for v in cover if v != last] + [last]


def cover_trajectory(graph: Graph, cover, gamma: float = 1.0) -> Trajectory:
    env = GraphEnv(graph, gamma)
    state = env.reset()
    steps = []
    for v in cover_order(graph, cover):
        obs = env.observe(state)
        token = env.token(state)
        state, r, _ = env.step(state, v)
        steps.append(Step(token, v, r, obs))
    if not state.terminal:
        raise ValueError("vertex set is not a cover")
    return Trajectory("A", tuple(steps), env.token(state), True, env.info(state))


def dive_trajectory(graph: Graph, target, gamma: float = 1.0) -> Trajectory:
    """Branch-and-bound dive ending at the leaf whose assignment is ``target``.

    Each step expands the open node consistent with ``target``. When that
    node's relaxation is integral but differs from ``target``, the dive
    branches on the lowest-index differing variable instead of recording it.
    The search budget equals the dive length, so the trajectory is complete.
    """
    target = np.asarray(target, dtype=int)
    plan = _plan_dive(graph, target, None, gamma)
    return _plan_dive(graph, target, len(plan), gamma)


def _plan_dive(graph: Graph, target: np.ndarray, budget, gamma):
    env = ILPEnv(graph, budget, gamma)
    tree = env.reset()
    steps = []
    while not tree.done:
        node = next(tree.nodes[i] for i in tree.open
                    if all(target[v] == val for v, val in tree.nodes[i].fixings))
        obs = env.observe(tree) if budget is not None else None
        token = env.token(tree) if budget is not None else None
        force = None
        if node.integral and not np.array_equal(np.round(node.lp.x).astype(int), target):
            force = int(np.flatnonzero(np.round(node.lp.x).astype(int) != target)[0])
        reward, _ = bnb_expand(tree, node.node_id, force_branch=force)
        steps.append(Step(token, node.fixings, reward, obs))
        if tree.has_incumbent:
            break
    if budget is None:
        return steps
    return Trajectory("B", tuple(steps), env.token(tree), tree.done, env.info(tree))


# ------------------------------------------------------------- instances and experts

def graph_to_ilp(traj: Trajectory, graph: Graph, gamma: float = 1.0) -> Trajectory:
    cover = set(traj.final_state)
    if not graph.is_cover(cover):
        raise IncompleteTrajectoryError("graph trajectory does not end in a cover")
    if not graph.edges:
        env = ILPEnv(graph, 0, gamma)
        tree = env.reset()
        return Trajectory("B", (), env.token(tree), True, env.info(tree))
    return dive_trajectory(graph, map_solution("A->B", cover, graph), gamma)


def ilp_to_graph(traj: Trajectory, graph: Graph, gamma: float = 1.0) -> Trajectory:
    x = traj.info.get("incumbent")
    if x is None:
        if not graph.edges:
            return cover_trajectory(graph, (), gamma)
        raise IncompleteTrajectoryError(
            "branch-and-bound trajectory found no incumbent; nothing to translate")
    cover = map_solution("B->A", np.array(x), graph)
    if graph.edges and all(graph.is_cover(cover - {v}) for v in cover):
        raise UnmappableTrajectoryError(
            "every vertex of the incumbent cover is redundant; the graph view stops earlier")
    return cover_trajectory(graph, cover, gamma)


def make_mvc_instance(graph: Graph, instance_id: str = "mvc", budget: int | None = DEFAULT_BUDGET,
                      gamma: float = 1.0) -> TwoViewInstance:
    return TwoViewInstance(
        instance_id, GraphEnv(graph, gamma), ILPEnv(graph, budget, gamma),
        ViewMapping("A", "B", lambda t: graph_to_ilp(t, graph, gamma)),
        ViewMapping("B", "A", lambda t: ilp_to_graph(t, graph, gamma)))


def best_first_node(tree: BnBTree) -> int:
    """Largest LP bound, oldest node on ties."""
    return max(tree.open, key=lambda i: (tree.nodes[i].bound, -i))


def solve_bnb(graph: Graph, budget: int | None = None) -> BnBTree:
    tree = BnBTree(build_ilp(graph), budget)
    while not tree.done:
        bnb_expand(tree, best_first_node(tree))
    return tree


def optimal_cover(graph: Graph) -> frozenset:
    tree = solve_bnb(graph)
    if tree.incumbent_x is None:
        return frozenset()
    return map_solution("B->A", tree.incumbent_x.astype(int), graph)


def expert_node(tree: BnBTree, target: np.ndarray) -> int:
    """Open node whose fixings agree with ``target``; best-first if none does."""
    for i in tree.open:
        if all(target[v] == val for v, val in tree.nodes[i].fixings):
            return i
    return best_first_node(tree)

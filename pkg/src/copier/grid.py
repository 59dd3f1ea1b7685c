"""Gridworld with two feature-masked views of the same cells.

Both views share the dynamics and the four actions (up, down, left, right);
they differ only in which coordinates of the full cell feature vector the
policy sees. Mapping a trajectory between views keeps every state token,
action and reward and re-renders the observations under the other mask.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import MDPSpec, Observation, Step, Trajectory, TwoViewInstance, ViewMapping

UP, DOWN, LEFT, RIGHT = 0, 1, 2, 3
ACTIONS = (UP, DOWN, LEFT, RIGHT)
MOVES = ((-1, 0), (1, 0), (0, -1), (0, 1))
TIE_TOL = 1e-9


@dataclass(frozen=True)
class GridConfig:
    width: int = 5
    height: int = 5
    start: tuple[int, int] = (0, 0)
    goal: tuple[int, int] | None = None  # default: bottom-right corner
    step_reward: float = -1.0
    goal_reward: float = 0.0
    gamma: float = 1.0
    mask_A: tuple[int, ...] | None = None  # default: row one-hot + distance
    mask_B: tuple[int, ...] | None = None  # default: column one-hot + wall bits
    noise: float = 0.0
    blocked: tuple[tuple[int, int], ...] = ()
    horizon: int | None = None  # default 4 * (width + height)

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise ValueError("grid dimensions must be positive")
        if self.goal is None:
            object.__setattr__(self, "goal", (self.height - 1, self.width - 1))
        object.__setattr__(self, "start", tuple(self.start))
        object.__setattr__(self, "goal", tuple(self.goal))
        object.__setattr__(self, "blocked", tuple(tuple(b) for b in self.blocked))
        for cell in (self.start, self.goal) + self.blocked:
            if not (0 <= cell[0] < self.height and 0 <= cell[1] < self.width):
                raise ValueError(f"cell {cell} lies outside the grid")
        if self.start == self.goal:
            raise ValueError("start and goal must differ")
        if self.start in self.blocked or self.goal in self.blocked:
            raise ValueError("start and goal must be free cells")
        if not 0.0 <= self.noise <= 0.5:
            raise ValueError("noise must lie in [0, 0.5]")
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        d = self.n_features
        rows = tuple(range(self.height))
        cols = tuple(range(self.height, self.height + self.width))
        dist = (self.height + self.width,)
        walls = tuple(range(self.height + self.width + 1, d))
        if self.mask_A is None:
            object.__setattr__(self, "mask_A", rows + dist)
        if self.mask_B is None:
            object.__setattr__(self, "mask_B", cols + walls)
        for name in ("mask_A", "mask_B"):
            mask = tuple(int(i) for i in getattr(self, name))
            object.__setattr__(self, name, mask)
            if not mask:
                raise ValueError(f"{name} must be nonempty")
            if any(not 0 <= i < d for i in mask) or len(set(mask)) != len(mask):
                raise ValueError(f"{name} must hold distinct indices in [0, {d})")
        if self.horizon is None:
            object.__setattr__(self, "horizon", 4 * (self.width + self.height))
        if self.horizon < 1:
            raise ValueError("horizon must be positive")

    @property
    def n_features(self) -> int:
        return self.height + self.width + 1 + 4

    @property
    def n_cells(self) -> int:
        return self.width * self.height

    def mask(self, view: str) -> tuple[int, ...]:
        return self.mask_A if view == "A" else self.mask_B

    def cell_index(self, cell) -> int:
        return cell[0] * self.width + cell[1]

    def cell_at(self, index: int) -> tuple[int, int]:
        return divmod(index, self.width)

    def free_cells(self) -> list[tuple[int, int]]:
        blocked = set(self.blocked)
        return [(r, c) for r in range(self.height) for c in range(self.width)
                if (r, c) not in blocked]


def _move(cfg: GridConfig, cell, action: int):
    dr, dc = MOVES[action]
    r, c = cell[0] + dr, cell[1] + dc
    if not (0 <= r < cfg.height and 0 <= c < cfg.width) or (r, c) in cfg.blocked:
        return cell
    return (r, c)


def full_features(cfg: GridConfig, cell) -> np.ndarray:
    """Row one-hot, column one-hot, Manhattan distance to goal (scaled to
    [0, 1]), and one wall bit per direction."""
    r, c = cell
    x = np.zeros(cfg.n_features)
    x[r] = 1.0
    x[cfg.height + c] = 1.0
    span = max(cfg.height + cfg.width - 2, 1)
    x[cfg.height + cfg.width] = (abs(cfg.goal[0] - r) + abs(cfg.goal[1] - c)) / span
    for a in ACTIONS:
        x[cfg.height + cfg.width + 1 + a] = 1.0 if _move(cfg, cell, a) == cell else 0.0
    return x


class GridEnv:
    def __init__(self, cfg: GridConfig, view: str):
        self.cfg = cfg
        self.view = view
        self.mask = np.array(cfg.mask(view))
        self.spec = MDPSpec(view, cfg.gamma, cfg.horizon, lambda s: s == cfg.goal,
                            time_limit_terminal=True)

    def reset(self, rng=None):
        return self.cfg.start

    def token(self, cell):
        return cell

    def observe(self, cell) -> Observation:
        return Observation(full_features(self.cfg, cell)[self.mask], ACTIONS)

    def step(self, cell, action, rng=None):
        if action not in ACTIONS:
            raise ValueError(f"unknown action {action!r}")
        if cell == self.cfg.goal:
            raise ValueError("goal is absorbing")
        if self.cfg.noise > 0.0:
            if rng is None:
                raise ValueError("a noisy grid needs an rng")
            if rng.random() < self.cfg.noise:
                action = int(rng.integers(4))
        nxt = _move(self.cfg, cell, action)
        reward = self.cfg.step_reward + (self.cfg.goal_reward if nxt == self.cfg.goal else 0.0)
        return nxt, reward, nxt == self.cfg.goal

    def is_terminal(self, cell) -> bool:
        return cell == self.cfg.goal


def remask(traj: Trajectory, cfg: GridConfig, target: str) -> Trajectory:
    mask = np.array(cfg.mask(target))
    steps = tuple(Step(s.state, s.action, s.reward,
                       Observation(full_features(cfg, s.state)[mask], ACTIONS))
                  for s in traj.steps)
    return Trajectory(target, steps, traj.final_state, traj.complete, dict(traj.info))


def make_two_view_grid(cfg: GridConfig, instance_id: str = "grid") -> TwoViewInstance:
    return TwoViewInstance(
        instance_id, GridEnv(cfg, "A"), GridEnv(cfg, "B"),
        ViewMapping("A", "B", lambda t: remask(t, cfg, "B")),
        ViewMapping("B", "A", lambda t: remask(t, cfg, "A")),
        shared_actions=True)


def comb_blocked(width: int, height: int) -> tuple[tuple[int, int], ...]:
    """Odd columns blocked above the bottom row: every free cell then has a
    unique optimal action when the goal is the bottom-right corner."""
    return tuple((r, c) for r in range(height - 1) for c in range(1, width, 2))


def grid_instances(cfg: GridConfig) -> list[TwoViewInstance]:
    """One instance per free non-goal start cell."""
    out = []
    for cell in cfg.free_cells():
        if cell != cfg.goal:
            sub = GridConfig(**{**cfg.__dict__, "start": cell})
            out.append(make_two_view_grid(sub, f"grid-{cell[0]}-{cell[1]}"))
    return out


# --------------------------------------------------------------- exact dynamic programming

@dataclass
class TabularModel:
    """P[s, a, s'] transition probabilities, R[s, a] expected rewards, terminal mask."""

    P: np.ndarray
    R: np.ndarray
    terminal: np.ndarray
    gamma: float


@dataclass
class ValueTable:
    V: np.ndarray
    Q: np.ndarray
    policy: np.ndarray
    terminal: np.ndarray
    cfg: GridConfig | None = field(default=None, repr=False)

    def action(self, cell) -> int:
        if self.cfg is None:
            return int(self.policy[cell])
        s = self.cfg.cell_index(cell)
        if self.terminal[s]:
            raise KeyError(f"cell {cell} is terminal")
        return int(self.policy[s])

    def value(self, cell) -> float:
        return float(self.V[self.cfg.cell_index(cell)])


def grid_model(cfg: GridConfig) -> TabularModel:
    S = cfg.n_cells
    P = np.zeros((S, 4, S))
    R = np.zeros((S, 4))
    terminal = np.zeros(S, dtype=bool)
    terminal[cfg.cell_index(cfg.goal)] = True
    for s in range(S):
        cell = cfg.cell_at(s)
        if terminal[s]:
            P[s, :, s] = 1.0
            continue
        for a in ACTIONS:
            for b in ACTIONS:
                prob = (1.0 - cfg.noise) * (a == b) + cfg.noise / 4.0
                if prob == 0.0:
                    continue
                nxt = _move(cfg, cell, b)
                P[s, a, cfg.cell_index(nxt)] += prob
                R[s, a] += prob * (cfg.step_reward + (cfg.goal_reward if nxt == cfg.goal else 0.0))
    return TabularModel(P, R, terminal, cfg.gamma)


def value_iteration(model, tolerance: float = 1e-10, max_iter: int = 1_000_000) -> ValueTable:
    """Sweep Bellman optimality backups until the max residual drops below tolerance."""
    cfg = model if isinstance(model, GridConfig) else None
    if cfg is not None:
        model = grid_model(cfg)
    P, R, term, gamma = model.P, model.R, model.terminal, model.gamma
    V = np.zeros(R.shape[0])
    for _ in range(max_iter):
        Q = R + gamma * P @ V
        Q[term] = 0.0
        V_new = Q.max(axis=1)
        residual = np.max(np.abs(V_new - V), initial=0.0)
        V = V_new
        if residual < tolerance:
            break
    else:
        raise RuntimeError(f"value iteration did not converge within {max_iter} sweeps")
    Q = R + gamma * P @ V
    Q[term] = 0.0
    V = Q.max(axis=1)  # keep V and Q consistent so V - Q >= 0 exactly
    best = V[:, None]
    policy = np.argmax(Q >= best - TIE_TOL, axis=1)
    return ValueTable(V, Q, policy, term, cfg)


def optimal_gap_u(table: ValueTable) -> float:
    live = ~table.terminal
    if not live.any():
        return 0.0
    return float(np.max(table.V[live, None] - table.Q[live]))


def optimal_action_fn(table: ValueTable):
    return lambda cell: table.action(cell)


# ------------------------------------------------------------ batched visit counting

def transition_table(cfg: GridConfig) -> np.ndarray:
    """next_cell[s, a] for deterministic moves."""
    nxt = np.zeros((cfg.n_cells, 4), dtype=int)
    for s in range(cfg.n_cells):
        for a in ACTIONS:
            nxt[s, a] = cfg.cell_index(_move(cfg, cfg.cell_at(s), a))
    return nxt


def greedy_table(policy, cfg: GridConfig, view: str) -> np.ndarray:
    """Greedy action of ``policy`` at every cell under ``view``'s mask."""
    from .policies import greedy_action

    mask = np.array(cfg.mask(view))
    return np.array([greedy_action(policy, full_features(cfg, cfg.cell_at(s))[mask])
                     for s in range(cfg.n_cells)])


def simulate_visit_counts(cfg: GridConfig, actions: np.ndarray, starts: np.ndarray,
                          rng: np.random.Generator) -> np.ndarray:
    """Undiscounted visit counts per cell of one episode from each start index,
    following the deterministic per-cell ``actions`` with the grid's slip noise.

    Same law as rolling out a greedy policy step by step, batched over episodes.
    """
    nxt = transition_table(cfg)
    goal = cfg.cell_index(cfg.goal)
    pos = np.asarray(starts, dtype=int).copy()
    counts = np.zeros(cfg.n_cells, dtype=np.int64)
    for _ in range(cfg.horizon):
        alive = pos != goal
        if not alive.any():
            break
        np.add.at(counts, pos[alive], 1)
        act = actions[pos]
        if cfg.noise > 0.0:
            slip = rng.random(pos.size) < cfg.noise
            act = np.where(slip, rng.integers(0, 4, pos.size), act)
        pos = np.where(alive, nxt[pos, act], pos)
    return counts

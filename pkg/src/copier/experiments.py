"""Run configuration, instance generation, training and evaluation pipelines.

Everything random derives from ``RunConfig.seed`` through
``np.random.default_rng([seed, stream, ...])`` with the stream ids below, so
results do not depend on execution order.
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import grid as gridmod
from . import mvc
from .algorithm import (GENERAL, SHARED, CopierConfig, better_of, best_rollout, copier_train,
                        solved)
from .core import TwoViewInstance
from .learners import IL_ONLY, RL_WITH_IL, UpdateConfig, demos_from_trajectories, pretrain_bc
from .policies import PolicyParams, init_policy, load_checkpoint, save_checkpoint
from .theory import (InstanceRollouts, disagreement_counts, disagreement_from_visits,
                     improvement_diagnostics, measure_policy_error, pac_disagreement_bound,
                     policy_error_from_visits)

STREAM_GRAPHS, STREAM_SPLIT, STREAM_INIT, STREAM_VISITS = 11, 12, 13, 14
MODES = ("copier", "single-A", "single-B")
SPLIT_WEIGHTS = (75, 30, 45)  # train / validation / test
LABELED_SHARE = (15, 75)      # labeled instances per training instances

HISTORY_COLUMNS = ["run_id", "iteration", "instance_id", "view", "eta_hat", "direction",
                   "n_demos", "n_mapped", "n_rejected", "beta_hat", "delta_hat_1",
                   "delta_hat_2", "b_per_action", "max_b", "epsilon_A", "wall_time", "status"]
SCHEMA_VERSION = 1
EVAL_COLUMNS = ["run_id", "instance_id", "reward_A", "reward_B", "final_reward",
                "final_view", "max_b", "epsilon_A"]
BOUND_COLUMNS = ["action", "n_A", "n_B", "n_agree", "eps", "zeta", "b", "defined", "valid"]
REQUIRED_FILES = ("config.txt", "manifest.csv", "history.csv", "evaluation.csv",
                  "policy_A.txt", "policy_B.txt")


@dataclass
class RunConfig:
    env: str = "mvc"
    seed: int = 0
    mode: str = "copier"
    out: str = "runs/default"
    iterations: int = 0  # 0 means the environment's default (see resolved())
    rollouts: int = 0
    arch_A: str = "linear"
    arch_B: str = "linear"
    hidden: int = 16
    # empty means the environment's default (see resolved())
    update_mode_A: str = ""
    update_mode_B: str = ""
    lambda_A: float = 1.0
    lambda_B: float = 1.0
    lr_A: float = 0.0
    lr_B: float = 0.0
    surrogate: str = "bc"
    exchange: str = ""
    pretrain_steps: int = 100
    pretrain_lr: float = 0.5
    diagnostics: bool = True
    record_wall_time: bool = False
    # minimum vertex cover
    n_instances: int = 66
    n_min: int = 20
    n_max: int = 40
    edge_p: float = 0.15
    budget: int = 30
    # gridworld
    grid_width: int = 5
    grid_height: int = 5
    grid_noise: float = 0.1
    grid_layout: str = "comb"
    grid_mask_A: str = ""
    grid_mask_B: str = ""
    grid_horizon: int = 0
    labeled_starts: int = 2
    eval_episodes: int = 20000
    eval_rollouts: int = 1
    sigma: float = 0.05
    checkpoint_A: str = ""
    checkpoint_B: str = ""

    def __post_init__(self):
        if self.env not in ("mvc", "grid"):
            raise ValueError("env must be 'mvc' or 'grid'")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if not 0.0 <= self.edge_p <= 1.0:
            raise ValueError("edge_p must lie in [0, 1]")
        if self.n_instances < 1 or not 1 <= self.n_min <= self.n_max:
            raise ValueError("need n_instances >= 1 and 1 <= n_min <= n_max")
        if not isinstance(self.seed, int):
            raise ValueError("seed must be an integer")

    def resolved(self) -> "RunConfig":
        """Fill environment-dependent defaults."""
        grid = self.env == "grid"
        return replace(
            self,
            update_mode_A=self.update_mode_A or RL_WITH_IL,
            update_mode_B=self.update_mode_B or (RL_WITH_IL if grid else IL_ONLY),
            iterations=self.iterations or (60 if grid else 30),
            rollouts=self.rollouts or (4 if grid else 2),
            lr_A=self.lr_A or (0.1 if grid else 0.01),
            lr_B=self.lr_B or (0.1 if grid else 0.5),
            exchange=self.exchange or (SHARED if grid else GENERAL))

    def dumps(self) -> str:
        return "".join(f"{k} = {_fmt_value(v)}\n" for k, v in asdict(self).items())

    @classmethod
    def parse(cls, text: str, overrides: dict | None = None) -> "RunConfig":
        raw: dict[str, str] = {}
        for n, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"config line {n}: expected 'key = value'")
            key, value = (p.strip() for p in line.split("=", 1))
            raw[key] = value
        raw.update({k: str(v) for k, v in (overrides or {}).items()})
        types = {f.name: f.type for f in fields(cls)}
        kwargs = {}
        for key, value in raw.items():
            if key not in types:
                raise ValueError(f"unknown config key {key!r}")
            kwargs[key] = _coerce(value, types[key], key)
        return cls(**kwargs)

    @classmethod
    def load(cls, path, overrides: dict | None = None) -> "RunConfig":
        text = Path(path).read_text() if path else ""
        return cls.parse(text, overrides)

    @property
    def run_id(self) -> str:
        return f"{self.env}-{self.mode}-s{self.seed}"


def _fmt_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    return str(v)


def _coerce(value: str, typ, key: str):
    typ = typ if isinstance(typ, str) else typ.__name__
    try:
        if typ == "bool":
            if value.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError
            return value.lower() in ("true", "1", "yes")
        if typ == "int":
            return int(value)
        if typ == "float":
            return float(value)
    except ValueError:
        raise ValueError(f"config key {key!r}: cannot read {value!r} as {typ}") from None
    return value


def _csv_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "" if math.isnan(v) else repr(float(v))
    return str(v)


def write_csv(path, columns, rows) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_csv_value(row.get(c)) for c in columns])
    Path(path).write_text(buf.getvalue())


def read_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


# ------------------------------------------------------------------------- instances

def split_sizes(n: int) -> tuple[int, int, int]:
    total = sum(SPLIT_WEIGHTS)
    n_train = round(n * SPLIT_WEIGHTS[0] / total)
    n_val = round(n * SPLIT_WEIGHTS[1] / total)
    return n_train, n_val, n - n_train - n_val


def make_graphs(cfg: RunConfig) -> list[mvc.Graph]:
    out = []
    for i in range(cfg.n_instances):
        rng = np.random.default_rng([cfg.seed, STREAM_GRAPHS, i])
        n = int(rng.integers(cfg.n_min, cfg.n_max + 1))
        out.append(mvc.generate_er_graph(n, cfg.edge_p, [cfg.seed, STREAM_GRAPHS, i, 1]))
    return out


def grid_config(cfg: RunConfig, start=(0, 0)) -> gridmod.GridConfig:
    def mask(text):
        return tuple(int(t) for t in text.split(",")) if text.strip() else None

    blocked = ()
    if cfg.grid_layout == "comb":
        blocked = gridmod.comb_blocked(cfg.grid_width, cfg.grid_height)
    elif cfg.grid_layout != "open":
        raise ValueError("grid_layout must be 'comb' or 'open'")
    return gridmod.GridConfig(cfg.grid_width, cfg.grid_height, start=start,
                              noise=cfg.grid_noise, blocked=blocked,
                              mask_A=mask(cfg.grid_mask_A), mask_B=mask(cfg.grid_mask_B),
                              horizon=cfg.grid_horizon or None)


def _grid_starts(cfg: RunConfig) -> list[tuple[int, int]]:
    base = grid_config(cfg)
    return [c for c in base.free_cells() if c != base.goal]


def plan_instances(cfg: RunConfig) -> list[dict]:
    """Manifest rows, each carrying its in-memory payload under ``"data"``
    (a Graph, or the GridConfig of one start cell)."""
    rows = []
    if cfg.env == "mvc":
        graphs = make_graphs(cfg)
        order = np.random.default_rng([cfg.seed, STREAM_SPLIT]).permutation(len(graphs))
        n_train, n_val, _ = split_sizes(len(graphs))
        n_labeled = round(n_train * LABELED_SHARE[0] / LABELED_SHARE[1])
        split_of = {}
        for rank, i in enumerate(order):
            if rank < n_train:
                split_of[i] = ("train", rank < n_labeled)
            elif rank < n_train + n_val:
                split_of[i] = ("validation", False)
            else:
                split_of[i] = ("test", False)
        for i, g in enumerate(graphs):
            split, labeled = split_of[i]
            rows.append({"instance_id": f"g{i:03d}", "file": f"instances/graph_{i:03d}.txt",
                         "split": split, "labeled": labeled, "data": g})
    else:
        starts = _grid_starts(cfg)
        rng = np.random.default_rng([cfg.seed, STREAM_SPLIT])
        labeled = set(rng.choice(len(starts), min(cfg.labeled_starts, len(starts)),
                                 replace=False).tolist())
        for i, (r, c) in enumerate(starts):
            rows.append({"instance_id": f"grid-{r}-{c}", "file": f"instances/grid_{r}_{c}.txt",
                         "split": "train", "labeled": i in labeled,
                         "data": grid_config(cfg, (r, c))})
    return rows


def generate(cfg: RunConfig, out: Path) -> list[dict]:
    """Write instance files and the manifest; returns manifest rows."""
    out.mkdir(parents=True, exist_ok=True)
    (out / "instances").mkdir(exist_ok=True)
    rows = plan_instances(cfg)
    for row in rows:
        data = row["data"]
        if cfg.env == "mvc":
            data.write(out / row["file"])
        else:
            (out / row["file"]).write_text("".join(
                f"{k} = {v}\n" for k, v in asdict(data).items()))
    write_csv(out / "manifest.csv", ["instance_id", "file", "split", "labeled"], rows)
    (out / "config.txt").write_text(cfg.dumps())
    return rows


@dataclass
class InstanceSet:
    train: list[TwoViewInstance]
    labeled: list[TwoViewInstance]
    test: list[TwoViewInstance]


def _instance(cfg: RunConfig, instance_id: str, data) -> TwoViewInstance:
    if cfg.env == "mvc":
        return mvc.make_mvc_instance(data, instance_id, cfg.budget)
    return gridmod.make_two_view_grid(data, instance_id)


def _collect(cfg: RunConfig, entries) -> InstanceSet:
    train, labeled, test = [], [], []
    for split, is_labeled, inst in entries:
        if split == "train":
            train.append(inst)
            if is_labeled:
                labeled.append(inst)
        elif split == "test":
            test.append(inst)
    if cfg.env == "grid":
        test = list(train)  # every start cell is a draw from the same MDP distribution
    return InstanceSet(train, labeled, test)


def build_instances(cfg: RunConfig) -> InstanceSet:
    """Same instances as ``generate`` followed by ``load_instances``, without files."""
    return _collect(cfg, [(r["split"], r["labeled"], _instance(cfg, r["instance_id"], r["data"]))
                          for r in plan_instances(cfg)])


def load_instances(cfg: RunConfig, out: Path) -> InstanceSet:
    path = out / "manifest.csv"
    if not path.exists():
        raise FileNotFoundError(f"{path} is missing; run 'generate' first")
    entries = []
    for row in read_csv(path):
        if cfg.env == "mvc":
            data = mvc.Graph.read(out / row["file"])
        else:
            r, c = (int(v) for v in row["instance_id"].split("-")[1:])
            data = grid_config(cfg, (r, c))
        entries.append((row["split"], row["labeled"] == "true",
                        _instance(cfg, row["instance_id"], data)))
    return _collect(cfg, entries)


# -------------------------------------------------------------------------- training

def feature_dims(cfg: RunConfig) -> tuple[int, int, int]:
    """(features A, features B, actions per policy output)."""
    if cfg.env == "mvc":
        return mvc.GRAPH_FEATURES, mvc.NODE_FEATURES, 1
    g = grid_config(cfg)
    return len(g.mask_A), len(g.mask_B), 4


def initial_policies(cfg: RunConfig) -> tuple[PolicyParams, PolicyParams]:
    dA, dB, k = feature_dims(cfg)
    rng = np.random.default_rng([cfg.seed, STREAM_INIT])
    return (init_policy(cfg.arch_A, dA, k, rng, cfg.hidden),
            init_policy(cfg.arch_B, dB, k, rng, cfg.hidden))


def optimal_covers(instances) -> dict[str, frozenset]:
    return {i.instance_id: mvc.optimal_cover(i.env_A.graph) for i in instances}


def mvc_expert(covers: dict[str, frozenset]):
    """Node-selection labels from the optimal assignment on labeled instances."""
    def expert(inst, view, trajs):
        if view != "B" or inst.instance_id not in covers:
            return []
        target = mvc.map_solution("A->B", covers[inst.instance_id], inst.env_A.graph)
        env = inst.env_B
        demos = []
        for t in trajs:
            tree = env.reset()
            for step in t.steps:
                obs = env.observe(tree)
                node = tree.nodes[mvc.expert_node(tree, target)]
                demos.append((obs.features, obs.index(node.fixings)))
                mvc.bnb_expand(tree, tree.node_by_fixings(step.action))
        return demos
    return expert


def grid_labeled_demos(instances) -> tuple[list, list]:
    """Optimal actions along the noise-free optimal path from each labeled start."""
    demos_A, demos_B = [], []
    for inst in instances:
        cfg = inst.env_A.cfg
        table = gridmod.value_iteration(cfg)
        cell = cfg.start
        for _ in range(cfg.horizon):
            if cell == cfg.goal:
                break
            a = table.action(cell)
            demos_A.append((inst.env_A.observe(cell).features, a))
            demos_B.append((inst.env_B.observe(cell).features, a))
            cell = gridmod._move(cfg, cell, a)
    return demos_A, demos_B


def pretrain(cfg: RunConfig, pA, pB, inst: InstanceSet, covers):
    if cfg.pretrain_steps <= 0 or not inst.labeled:
        return pA, pB
    if cfg.env == "mvc":
        demos = demos_from_trajectories(
            [mvc.cover_trajectory(i.env_A.graph, covers[i.instance_id]) for i in inst.labeled])
        return pretrain_bc(pA, demos, cfg.pretrain_lr, cfg.pretrain_steps), pB
    dA, dB = grid_labeled_demos(inst.labeled)
    return (pretrain_bc(pA, dA, cfg.pretrain_lr, cfg.pretrain_steps),
            pretrain_bc(pB, dB, cfg.pretrain_lr, cfg.pretrain_steps))


def copier_config(cfg: RunConfig) -> CopierConfig:
    r = cfg.resolved()
    views = {"copier": "both", "single-A": "A", "single-B": "B"}[cfg.mode]
    return CopierConfig(
        iterations=r.iterations, m=r.rollouts, n=r.rollouts,
        update_A=UpdateConfig(r.update_mode_A, r.lambda_A, r.lr_A, 1.0, r.surrogate),
        update_B=UpdateConfig(r.update_mode_B, r.lambda_B, r.lr_B, 1.0, r.surrogate),
        exchange_mode=r.exchange, seed=r.seed, views=views)


@dataclass
class TrainResult:
    policy_A: PolicyParams
    policy_B: PolicyParams
    rows: list[dict]
    n_mapped: int
    n_rejected: int


def train(cfg: RunConfig, inst: InstanceSet) -> TrainResult:
    covers = optimal_covers(inst.labeled) if cfg.env == "mvc" else {}
    pA, pB = initial_policies(cfg)
    pA, pB = pretrain(cfg, pA, pB, inst, covers)
    expert = mvc_expert(covers) if cfg.env == "mvc" else None
    sampler = inst.train
    if cfg.env == "mvc" and cfg.mode == "single-B":
        sampler = inst.labeled  # imitation alone learns only where the expert labels
    if not sampler:
        raise ValueError("no training instances in the manifest")
    optimal = None
    if cfg.env == "grid" and cfg.diagnostics:
        optimal = gridmod.value_iteration(inst.train[0].env_A.cfg)
    rows: list[dict] = []
    clock = [time.perf_counter()]
    current = [None]

    def log(rec, instance, trajs_A, trajs_B, before, after):
        row = {"run_id": cfg.run_id, "iteration": rec.iteration,
               "instance_id": rec.instance_id, "direction": rec.direction,
               "n_mapped": rec.n_mapped if rec.direction else None,
               "n_rejected": rec.n_rejected if rec.direction else None, "status": "ok"}
        if cfg.diagnostics and trajs_A and trajs_B:
            diag = improvement_diagnostics([InstanceRollouts(instance, trajs_A, trajs_B)],
                                           before, after)
            row.update(delta_hat_1=diag.delta_hat_1, delta_hat_2=diag.delta_hat_2)
            beta = {"A": diag.beta_hat_D1, "B": diag.beta_hat_D2}
        else:
            beta = {}
        if optimal is not None and trajs_A:
            row["epsilon_A"] = measure_policy_error(after[0], optimal.action, trajs_A)
            if trajs_B:
                stats = disagreement_counts(trajs_A, instance, *after)
                report = pac_disagreement_bound(stats, after[0].bits, after[1].bits, cfg.sigma)
                row["b_per_action"] = ";".join(_csv_value(float(b)) for b in report.b)
                row["max_b"] = report.max_b
        now = time.perf_counter()
        row["wall_time"] = now - clock[0] if cfg.record_wall_time else None
        clock[0] = now
        for view, trajs, eta, n_demos in (("A", trajs_A, rec.eta_hat_A, rec.n_demos_A),
                                          ("B", trajs_B, rec.eta_hat_B, rec.n_demos_B)):
            if trajs:
                rows.append(dict(row, view=view, eta_hat=eta, n_demos=n_demos,
                                 beta_hat=beta.get(view)))
        current[0] = rec.iteration + 1

    def sample(rng):
        inst_ = sampler[int(rng.integers(len(sampler)))]
        current[1:] = [inst_.instance_id]
        return inst_

    try:
        pA, pB, history = copier_train(sample, pA, pB, copier_config(cfg), expert, log)
    except Exception as exc:
        iid = current[1] if len(current) > 1 else ""
        rows.append({"run_id": cfg.run_id, "iteration": current[0] or 0, "instance_id": iid,
                     "status": f"aborted: {type(exc).__name__}: {exc}"})
        raise TrainingAborted(rows, iid) from exc
    return TrainResult(pA, pB, rows, sum(r.n_mapped for r in history.records),
                       sum(r.n_rejected for r in history.records))


class TrainingAborted(RuntimeError):
    """A subroutine failed mid-run; ``rows`` ends with the aborted marker."""

    def __init__(self, rows, instance_id):
        super().__init__(f"training aborted on instance {instance_id!r}")
        self.rows = rows
        self.instance_id = instance_id


# ------------------------------------------------------------------------ evaluation

@dataclass
class EvalResult:
    rows: list[dict]
    bound_rows: list[dict]
    mean_final: float
    mean_A: float
    mean_B: float
    epsilon_A: float = float("nan")
    max_b: float = float("nan")
    all_valid: bool = False


def _reward(t):
    return t.total_reward if solved(t) else float("nan")


def evaluate(cfg: RunConfig, pA: PolicyParams, pB: PolicyParams,
             instances: list[TwoViewInstance]) -> EvalResult:
    rows = []
    for inst in instances:
        for k in range(cfg.eval_rollouts):
            ta = best_rollout(pA, inst.env_A, greedy_seed=k)
            tb = best_rollout(pB, inst.env_B, greedy_seed=k)
            best, view = better_of(ta, tb)
            iid = inst.instance_id if cfg.eval_rollouts == 1 else f"{inst.instance_id}#{k}"
            rows.append({"run_id": cfg.run_id, "instance_id": iid, "reward_A": _reward(ta),
                         "reward_B": _reward(tb), "final_reward": _reward(best),
                         "final_view": view})
    res = EvalResult(rows, [], *(float(np.nanmean([r[c] for r in rows]))
                                 for c in ("final_reward", "reward_A", "reward_B")))
    if cfg.env == "grid":
        _grid_bound(cfg, pA, pB, instances, res)
    rows.append({"run_id": cfg.run_id, "instance_id": "mean", "reward_A": res.mean_A,
                 "reward_B": res.mean_B, "final_reward": res.mean_final,
                 "max_b": res.max_b, "epsilon_A": res.epsilon_A})
    return res


def _grid_bound(cfg: RunConfig, pA, pB, instances, res: EvalResult) -> None:
    g = instances[0].env_A.cfg
    table = gridmod.value_iteration(g)
    act_A = gridmod.greedy_table(pA, g, "A")
    act_B = gridmod.greedy_table(pB, g, "B")
    starts = np.array([g.cell_index(i.env_A.cfg.start) for i in instances])
    rng = np.random.default_rng([cfg.seed, STREAM_VISITS])
    counts = gridmod.simulate_visit_counts(g, act_A, rng.choice(starts, cfg.eval_episodes), rng)
    stats = disagreement_from_visits(counts, act_A, act_B, 4)
    report = pac_disagreement_bound(stats, pA.bits, pB.bits, cfg.sigma)
    res.epsilon_A = policy_error_from_visits(counts, act_A, table.policy)
    res.max_b = report.max_b
    res.all_valid = report.all_valid
    for i in range(4):
        res.bound_rows.append({
            "action": i, "n_A": int(stats.n_A[i]), "n_B": int(stats.n_B[i]),
            "n_agree": int(stats.n_agree[i]), "eps": float(report.eps[i]),
            "zeta": float(report.zeta[i]), "b": float(report.b[i]),
            "defined": bool(report.defined[i]), "valid": bool(report.valid[i])})


# ----------------------------------------------------------------------- run helpers

def run_train(cfg: RunConfig, out: Path) -> TrainResult:
    inst = load_instances(cfg, out)
    try:
        result = train(cfg, inst)
    except TrainingAborted as exc:
        write_csv(out / "history.csv", HISTORY_COLUMNS, exc.rows)
        raise
    save_checkpoint(result.policy_A, out / "policy_A.txt")
    save_checkpoint(result.policy_B, out / "policy_B.txt")
    write_csv(out / "history.csv", HISTORY_COLUMNS, result.rows)
    (out / "config.txt").write_text(cfg.dumps())
    return result


def run_evaluate(cfg: RunConfig, out: Path) -> EvalResult:
    inst = load_instances(cfg, out)
    paths = [Path(cfg.checkpoint_A) if cfg.checkpoint_A else out / "policy_A.txt",
             Path(cfg.checkpoint_B) if cfg.checkpoint_B else out / "policy_B.txt"]
    for p in paths:
        if not p.exists():
            raise FileNotFoundError(f"checkpoint {p} is missing; run 'train' first")
    pA, pB = (load_checkpoint(p) for p in paths)
    result = evaluate(cfg, pA, pB, inst.test)
    write_csv(out / "evaluation.csv", EVAL_COLUMNS, result.rows)
    if result.bound_rows:
        write_csv(out / "bounds.csv", BOUND_COLUMNS, result.bound_rows)
    return result


def missing_files(out: Path) -> list[str]:
    return [name for name in REQUIRED_FILES if not (out / name).exists()]


# ------------------------------------------------------------------- in-memory runs

@dataclass
class Comparison:
    copier: EvalResult
    single_A: EvalResult
    single_B: EvalResult
    combined_baseline: float  # per-instance best of the two single-view policies, averaged
    n_mapped: int

    @property
    def better_single(self) -> float:
        return max(self.single_A.mean_A, self.single_B.mean_B)


def run_in_memory(cfg: RunConfig, inst: InstanceSet | None = None
                  ) -> tuple[TrainResult, EvalResult]:
    inst = inst if inst is not None else build_instances(cfg)
    result = train(cfg, inst)
    return result, evaluate(cfg, result.policy_A, result.policy_B, inst.test)


def compare_modes(cfg: RunConfig) -> Comparison:
    """Co-training against both single-view baselines on the same instances."""
    inst = build_instances(cfg)
    co_train, co = run_in_memory(replace(cfg, mode="copier"), inst)
    _, ea = run_in_memory(replace(cfg, mode="single-A"), inst)
    _, eb = run_in_memory(replace(cfg, mode="single-B"), inst)
    per_instance = [np.nanmax([a["reward_A"], b["reward_B"]])
                    for a, b in zip(ea.rows[:-1], eb.rows[:-1])]
    return Comparison(co, ea, eb, float(np.mean(per_instance)), co_train.n_mapped)

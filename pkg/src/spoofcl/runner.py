"""Sequential train-then-evaluate loop over the task sequence."""

import time
from dataclasses import dataclass, field

from . import __version__
from .data import build_task
from .errors import BenchmarkError
from .metrics import build_eval_matrix, summarize
from .nn import init_model
from .rng import derive_rng
from .strategies import build_strategy
from .training import TrainConfig, train_task


def model_seed(seed: int) -> int:
    return int(derive_rng(seed, "init").integers(2 ** 63))


def build_tasks(specs, seed: int, dim: int, selection: str = "random", committee_size: int = 5):
    data_seed = int(derive_rng(seed, "data").integers(2 ** 63))
    tasks = []
    for spec in specs:
        try:
            tasks.append(build_task(spec, data_seed, dim, selection, committee_size))
        except BenchmarkError as exc:
            raise type(exc)(f"task {spec.task_id} ({spec.name}), seed {seed}: {exc}") from exc
    return tasks


@dataclass
class StrategyRun:
    strategy: str
    seed: int
    matrix: object
    summary: object
    snapshots: list = field(repr=False)
    state_digest: str = ""
    seconds: float = 0.0


def run_strategy(name, params, tasks, seed: int, hidden_width: int = 128,
                 train_cfg: TrainConfig = TrainConfig()) -> StrategyRun:
    """Train one fresh model through ``tasks`` under strategy ``name``.

    Uses the same init and per-task shuffling streams for every strategy,
    so strategies whose hooks are inert on a task train bit-identically.
    """
    start = time.perf_counter()
    dim = tasks[0].train_arrays()[0].shape[1]
    model = init_model(dim, hidden_width, model_seed(seed))
    strategy = build_strategy(name, **dict(params or {}))
    strategy.setup(model, derive_rng(seed, "strategy", name), train_cfg)
    snapshots = []
    for task in tasks:
        try:
            model = train_task(model, task, strategy, train_cfg, derive_rng(seed, "train", task.spec.task_id))
        except BenchmarkError as exc:
            raise type(exc)(f"strategy {name}, task {task.spec.task_id}, seed {seed}: {exc}") from exc
        snapshots.append(model.copy())
    matrix = build_eval_matrix(snapshots, tasks)
    return StrategyRun(name, seed, matrix, summarize(matrix), snapshots, strategy.state_digest(),
                       time.perf_counter() - start)


@dataclass
class RunRecord:
    config: object
    config_digest: str
    runs: dict  # (strategy, seed) -> StrategyRun
    version: str = __version__
    data_seconds: dict = field(default_factory=dict)

    @property
    def seeds(self):
        return sorted({s for _, s in self.runs})

    @property
    def strategies(self):
        return list(dict.fromkeys(name for name, _ in self.runs))

    @property
    def task_names(self):
        return tuple(t.name for t in self.config.tasks)


def run_benchmark(config, progress=None) -> RunRecord:
    """Every configured strategy on every seed of ``config``.

    Task data is built once per seed and shared read-only by all
    strategies; each strategy starts from the same seed-derived init.
    """
    runs, data_seconds = {}, {}
    for seed in config.seed_list:
        start = time.perf_counter()
        tasks = build_tasks(config.tasks, seed, config.input_dim, config.selection, config.committee_size)
        data_seconds[seed] = time.perf_counter() - start
        for name in config.strategies:
            run = run_strategy(name, config.params_for(name), tasks, seed, config.hidden_width, config.train)
            run.snapshots = []  # the record keeps results, not weights
            runs[(name, seed)] = run
            if progress is not None:
                progress(run)
    return RunRecord(config, config.digest(), runs, data_seconds=data_seconds)

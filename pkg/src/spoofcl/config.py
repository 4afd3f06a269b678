"""Experiment configuration files.

Line-oriented ``key = value`` text with ``#`` comments, in three kinds of
section::

    [experiment]
    seed = 0
    seeds = 5
    strategies = finetune, replay, ewc
    epochs = 20

    [task.1]                 # one per task; omit all to get the default 8
    name = Task1
    language = Chinese
    condition = Human
    separation = 4.0         # synthetic shift parameters ...
    # path = feats.txt       # ... or a feature file to select from

    [strategy.ewc]
    lam = 100

Every key is optional. Unknown sections, keys, and strategy names are
rejected, with the offending name in the message.
"""

import configparser
import hashlib
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .data import SyntheticShift, TaskSpec, default_task_specs
from .errors import BenchmarkError, ConfigError
from .strategies import STRATEGIES, STRATEGY_NAMES, strategy_params
from .training import TrainConfig


@dataclass(frozen=True)
class ExperimentConfig:
    tasks: tuple = field(default_factory=lambda: tuple(default_task_specs()))
    strategies: tuple = STRATEGY_NAMES
    strategy_params: dict = field(default_factory=dict)
    input_dim: int = 128
    hidden_width: int = 128
    train: TrainConfig = field(default_factory=TrainConfig)
    selection: str = "random"
    committee_size: int = 5
    seed: int = 0
    seeds: int = 5
    output_dir: str = "results"

    @property
    def seed_list(self):
        return [self.seed + i for i in range(self.seeds)]

    def params_for(self, name: str) -> dict:
        return dict(self.strategy_params.get(name, {}))

    def digest(self) -> str:
        return hashlib.sha256(serialize_config(self).encode("utf-8")).hexdigest()


EXPERIMENT_KEYS = {
    "seed": int, "seeds": int, "strategies": str, "selection": str, "committee_size": int,
    "input_dim": int, "hidden_width": int, "lr": float, "momentum": float, "batch_size": int,
    "epochs": int, "train_count": int, "eval_count": int, "output_dir": str,
}

TASK_KEYS = {
    "name": str, "language": str, "condition": str, "train_count": int, "eval_count": int,
    "path": str, "committee_path": str,
}
SHIFT_KEYS = {f.name: f.type if isinstance(f.type, type) else type(f.default) for f in fields(SyntheticShift)}
# SyntheticShift.condition is the center id; the task's [condition] key is its tag
SHIFT_KEYS["condition_id"] = SHIFT_KEYS.pop("condition")


def _convert(section, key, raw, typ):
    try:
        if typ is int:
            return int(raw)
        if typ is float:
            return float(raw)
        if typ is bool:
            if raw.lower() not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(raw)
            return raw.lower() in ("true", "1", "yes")
        return raw
    except ValueError:
        raise ConfigError(f"[{section}] invalid value for {key}: {raw!r}") from None


def _read(text: str, source: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=("#",), empty_lines_in_values=False)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from None
    return parser


def _task_from_section(section, items, defaults):
    base = defaults.get(section_id(section))
    unknown = [k for k in items if k not in TASK_KEYS and k not in SHIFT_KEYS]
    if unknown:
        raise ConfigError(f"[{section}] unknown key: {unknown[0]}")
    vals = {k: _convert(section, k, v, TASK_KEYS.get(k) or SHIFT_KEYS[k]) for k, v in items.items()}
    shift_vals = {("condition" if k == "condition_id" else k): v for k, v in vals.items() if k in SHIFT_KEYS}
    task_id = section_id(section)
    path = vals.get("path")
    if path is not None and shift_vals:
        raise ConfigError(f"[{section}] a file-backed task cannot also set synthetic shift keys")
    if path is not None:
        shift = None
    else:
        base_shift = base.shift if base is not None else SyntheticShift(attack=task_id)
        shift = replace(base_shift, **shift_vals)
    try:
        return TaskSpec(
            task_id=task_id,
            name=vals.get("name", base.name if base else f"Task{task_id}"),
            language_tag=vals.get("language", base.language_tag if base else ""),
            condition_tag=vals.get("condition", base.condition_tag if base else ""),
            train_count=vals.get("train_count", base.train_count if base else 2000),
            eval_count=vals.get("eval_count", base.eval_count if base else 5000),
            shift=shift,
            path=path,
            committee_path=vals.get("committee_path"),
        )
    except BenchmarkError as exc:
        raise ConfigError(f"[{section}] {exc}") from None


def section_id(section: str) -> int:
    try:
        return int(section.split(".", 1)[1])
    except (IndexError, ValueError):
        raise ConfigError(f"task section must be [task.<integer>], got [{section}]") from None


def _tasks_from_parser(parser, train_count, eval_count):
    defaults = {s.task_id: s for s in default_task_specs(train_count, eval_count)}
    sections = [s for s in parser.sections() if s.startswith("task.")]
    tasks = [_task_from_section(s, dict(parser[s]), defaults) for s in sections]
    tasks.sort(key=lambda t: t.task_id)
    ids = [t.task_id for t in tasks]
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate task ids")
    return tuple(tasks)


def parse_config_text(text: str, source: str = "<config>") -> ExperimentConfig:
    parser = _read(text, source)
    for section in parser.sections():
        if section != "experiment" and not section.startswith(("task.", "strategy.")):
            raise ConfigError(f"unknown section: [{section}]")
    exp = dict(parser["experiment"]) if parser.has_section("experiment") else {}
    for key in exp:
        if key not in EXPERIMENT_KEYS:
            raise ConfigError(f"[experiment] unknown key: {key}")
    e = {k: _convert("experiment", k, v, EXPERIMENT_KEYS[k]) for k, v in exp.items()}

    strategies = STRATEGY_NAMES
    if "strategies" in e:
        strategies = tuple(s.strip() for s in e["strategies"].split(",") if s.strip())
    for name in strategies:
        if name not in STRATEGIES:
            raise ConfigError(f"unknown strategy: {name}")
    if not strategies:
        raise ConfigError("at least one strategy is required")
    if len(set(strategies)) != len(strategies):
        raise ConfigError("strategy listed twice")

    params = {}
    for section in parser.sections():
        if not section.startswith("strategy."):
            continue
        name = section.split(".", 1)[1]
        if name not in STRATEGIES:
            raise ConfigError(f"unknown strategy: {name}")
        allowed = strategy_params(name)
        ps = {}
        for key, raw in parser[section].items():
            if key not in allowed:
                raise ConfigError(f"[{section}] unknown key: {key}")
            default = allowed[key]
            ps[key] = _convert(section, key, raw, type(default) if default is not None else str)
        params[name] = ps

    train_count = e.get("train_count", 2000)
    eval_count = e.get("eval_count", 5000)
    try:
        tasks = _tasks_from_parser(parser, train_count, eval_count)
        if not tasks:
            tasks = tuple(default_task_specs(train_count, eval_count))
    except BenchmarkError as exc:
        raise ConfigError(str(exc)) from None

    try:
        train = TrainConfig(e.get("lr", 0.01), e.get("momentum", 0.9), e.get("batch_size", 64), e.get("epochs", 20))
    except BenchmarkError as exc:
        raise ConfigError(f"[experiment] {exc}") from None
    cfg = ExperimentConfig(
        tasks=tasks,
        strategies=strategies,
        strategy_params=params,
        input_dim=e.get("input_dim", 128),
        hidden_width=e.get("hidden_width", 128),
        train=train,
        selection=e.get("selection", "random"),
        committee_size=e.get("committee_size", 5),
        seed=e.get("seed", 0),
        seeds=e.get("seeds", 5),
        output_dir=e.get("output_dir", "results"),
    )
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig):
    if not cfg.tasks:
        raise ConfigError("at least one task is required")
    if cfg.seeds < 1:
        raise ConfigError(f"seeds must be at least 1, got {cfg.seeds}")
    if cfg.input_dim < 1 or cfg.hidden_width < 1:
        raise ConfigError("input_dim and hidden_width must be positive")
    if cfg.selection not in ("random", "informative"):
        raise ConfigError(f"selection must be random or informative, got {cfg.selection!r}")
    if cfg.committee_size < 1:
        raise ConfigError("committee_size must be at least 1")
    for name in cfg.strategies:
        if name not in STRATEGIES:
            raise ConfigError(f"unknown strategy: {name}")
        try:
            STRATEGIES[name](**cfg.params_for(name))
        except BenchmarkError as exc:
            raise ConfigError(f"[strategy.{name}] {exc}") from None


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config_text(text, str(path))


def parse_task_file(path, train_count: int = 2000, eval_count: int = 5000):
    """Task list from a file holding only ``[task.N]`` sections."""
    path = Path(path)
    try:
        parser = _read(path.read_text(encoding="utf-8"), str(path))
    except OSError as exc:
        raise ConfigError(f"cannot read task file {path}: {exc}") from None
    for section in parser.sections():
        if not section.startswith("task."):
            raise ConfigError(f"{path}: only [task.N] sections allowed, got [{section}]")
    try:
        tasks = _tasks_from_parser(parser, train_count, eval_count)
    except BenchmarkError as exc:
        raise ConfigError(str(exc)) from None
    if not tasks:
        raise ConfigError(f"{path}: no task sections")
    return tasks


def _fmt(v):
    return repr(v) if isinstance(v, float) else str(v)


def serialize_config(cfg: ExperimentConfig) -> str:
    """Fully explicit config text; parses back to an equal config."""
    t = cfg.train
    lines = ["[experiment]"]
    exp = {
        "seed": cfg.seed, "seeds": cfg.seeds, "strategies": ", ".join(cfg.strategies),
        "selection": cfg.selection, "committee_size": cfg.committee_size, "input_dim": cfg.input_dim,
        "hidden_width": cfg.hidden_width, "lr": t.lr, "momentum": t.momentum, "batch_size": t.batch_size,
        "epochs": t.epochs, "output_dir": cfg.output_dir,
    }
    lines += [f"{k} = {_fmt(v)}" for k, v in exp.items()]
    for task in cfg.tasks:
        lines += ["", f"[task.{task.task_id}]", f"name = {task.name}",
                  f"language = {task.language_tag}", f"condition = {task.condition_tag}",
                  f"train_count = {task.train_count}", f"eval_count = {task.eval_count}"]
        if task.path is not None:
            lines.append(f"path = {task.path}")
        if task.committee_path is not None:
            lines.append(f"committee_path = {task.committee_path}")
        if task.shift is not None:
            for f in fields(SyntheticShift):
                key = "condition_id" if f.name == "condition" else f.name
                lines.append(f"{key} = {_fmt(getattr(task.shift, f.name))}")
    for name in sorted(cfg.strategy_params):
        ps = cfg.strategy_params[name]
        lines += ["", f"[strategy.{name}]"] + [f"{k} = {_fmt(v)}" for k, v in sorted(ps.items())]
    return "\n".join(lines) + "\n"

from dataclasses import replace

import pytest

from spoofcl.config import ExperimentConfig
from spoofcl.data import default_task_specs
from spoofcl.training import TrainConfig


def tiny_config(n_tasks=3, strategies=("finetune", "ewc"), seeds=2, **kw):
    """A config small enough to run end to end in about a second."""
    tasks = tuple(default_task_specs(train_count=80, eval_count=60)[:n_tasks])
    base = ExperimentConfig(tasks=tasks, strategies=tuple(strategies), input_dim=8, hidden_width=12,
                            train=TrainConfig(batch_size=16, epochs=2), seeds=seeds)
    return replace(base, **kw)


@pytest.fixture
def tiny():
    return tiny_config


# criterion number -> (title, passed, detail, seconds), filled by test_acceptance
ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(ACCEPTANCE):
        title, ok, detail, _ = ACCEPTANCE[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {n}. {title}: {detail}")

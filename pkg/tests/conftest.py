import json
import os

import numpy as np
import pytest

from antsyn.distiller import ModelConfig, TrainConfig
from antsyn.pipeline import run_pipeline
from antsyn.synthetic import planted_task

# Configuration for the planted-task acceptance run. Chosen once; see the
# decisions ledger for the sweep that picked it.
PLANTED_TRAIN = dict(learning_rate=3e-3, batch_size=16, epochs=200, patience=200, seed=0)

ACCEPTANCE_LOG = os.path.join(os.path.dirname(__file__), ".acceptance.jsonl")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def planted():
    return planted_task(seed=0)


@pytest.fixture(scope="session")
def planted_run(planted):
    import time

    t0 = time.perf_counter()
    res = run_pipeline(planted.table, planted.split, TrainConfig(**PLANTED_TRAIN))
    res.elapsed = time.perf_counter() - t0
    return res


def pytest_sessionstart(session):
    if os.path.exists(ACCEPTANCE_LOG):
        os.remove(ACCEPTANCE_LOG)


def pytest_terminal_summary(terminalreporter):
    if not os.path.exists(ACCEPTANCE_LOG):
        return
    rows = [json.loads(line) for line in open(ACCEPTANCE_LOG, encoding="utf-8")]
    terminalreporter.section("acceptance criteria")
    for r in sorted(rows, key=lambda r: str(r["criterion"])):
        status = "PASS" if r["passed"] else ("SKIP" if r["passed"] is None else "FAIL")
        terminalreporter.write_line(f"[{status}] criterion {r['criterion']}: {r['detail']}")
    os.remove(ACCEPTANCE_LOG)

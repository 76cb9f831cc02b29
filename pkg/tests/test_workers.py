import time

import pytest

from src.spatialrisk.errors import ConfigError
from src.spatialrisk.workers import THREADS_VARIABLE, parallel_map, worker_count


def test_results_keep_submission_order():
    def slow_square(x):
        time.sleep(0.01 * (5 - x))
        return x * x

    assert parallel_map(slow_square, range(5), workers=4) == [0, 1, 4, 9, 16]
    assert parallel_map(slow_square, range(5), workers=1) == [0, 1, 4, 9, 16]


def test_worker_count_from_environment(monkeypatch):
    monkeypatch.delenv(THREADS_VARIABLE, raising=False)
    assert worker_count() == 1
    monkeypatch.setenv(THREADS_VARIABLE, "3")
    assert worker_count() == 3


@pytest.mark.parametrize("value", ["zero", "0", "-2"])
def test_invalid_worker_count(monkeypatch, value):
    monkeypatch.setenv(THREADS_VARIABLE, value)
    with pytest.raises(ConfigError):
        worker_count()


def test_errors_propagate():
    def fail(x):
        raise ValueError(x)

    with pytest.raises(ValueError):
        parallel_map(fail, [1, 2], workers=2)

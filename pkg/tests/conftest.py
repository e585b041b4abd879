import pytest

from advexplain import datasets, models

DESK_SEED = 0
DESK_EPS = 0.75
DESK_ITERS = 20


@pytest.fixture(scope="session")
def desk_split():
    data = datasets.make_textures(600, seed=DESK_SEED)
    return datasets.split_dataset(data, 0.75, seed=DESK_SEED)


@pytest.fixture(scope="session")
def desk_model(desk_split):
    train, _ = desk_split
    model = models.build_cnn((1, 16, 16), 4, seed=DESK_SEED, filters=12, hidden=48, pool=False)
    return models.train_sgd(model, train, {"lr": 0.05, "epochs": 40, "batch": 8, "seed": DESK_SEED})


@pytest.fixture(scope="session")
def desk_test(desk_split):
    return desk_split[1]


@pytest.fixture(scope="session")
def digits_split():
    data = datasets.make_digits(200, seed=DESK_SEED)
    return datasets.split_dataset(data, 0.75, seed=DESK_SEED)


@pytest.fixture(scope="session")
def digits_model(digits_split):
    train, _ = digits_split
    model = models.build_mlp(64, [32], 4, seed=DESK_SEED)
    return models.train_sgd(model, train, {"lr": 0.5, "epochs": 30, "batch": 16, "seed": DESK_SEED})


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if rep.when != "call" or "test_acceptance.py::" not in rep.nodeid:
                continue
            rows.append((rep.nodeid.split("::")[-1], outcome))
    if not rows:
        return
    terminalreporter.write_sep("-", "acceptance criteria")
    for name, outcome in sorted(rows):
        terminalreporter.write_line(f"[{'PASS' if outcome == 'passed' else 'FAIL'}] {name}")

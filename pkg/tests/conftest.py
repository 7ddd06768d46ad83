from importlib.resources import files
from pathlib import Path

import numpy as np
import pytest

from diapol import cli

DATA = Path(str(files("diapol") / "data"))


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def toy_job():
    return cli.job_from_raw(cli.read_config(DATA / "toy" / "toy.cfg"))


@pytest.fixture(scope="session")
def toy_molecule(toy_job):
    return cli.load_molecule(toy_job)


@pytest.fixture(scope="session")
def toy_table(toy_job, toy_molecule):
    return cli.transition_table(toy_job, toy_molecule)


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)

import csv
import io

import numpy as np
import pytest

from musicid.features import featurize_dataset
from musicid.ingest import serialize_session
from musicid.synth import generate_cohort, generate_session, make_profile, uniform_cohort


def session_csv(n_samples=300, seed=0, user_index=0, condition="SameSong"):
    spec = uniform_cohort(max(2, user_index + 1), seed=seed)
    profile = make_profile(user_index, spec)
    s = generate_session(profile, condition, n_samples, np.random.default_rng(seed))
    return serialize_session(s)


def edit_csv(data: bytes, fn) -> bytes:
    """Apply ``fn(header, rows) -> (header, rows)`` to CSV bytes."""
    rows = list(csv.reader(io.StringIO(data.decode())))
    header, body = fn(rows[0], rows[1:])
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(header)
    w.writerows(body)
    return out.getvalue().encode()


@pytest.fixture(scope="session")
def small_cohort():
    """Five users, three sessions per condition, well separated."""
    return generate_cohort(uniform_cohort(5, sessions=3, separation=3.0, seed=11))


@pytest.fixture(scope="session")
def small_matrix(small_cohort):
    return featurize_dataset(small_cohort)


@pytest.fixture(scope="session")
def shifted_matrix():
    return featurize_dataset(
        generate_cohort(uniform_cohort(4, sessions=3, separation=3.0, condition_shift=3.0, seed=5))
    )


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS):
            terminalreporter.write_line(line)

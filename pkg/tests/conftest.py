import functools

import pytest

from derivlab.algebra import generate_samples, random_unit_element
from derivlab.maps import InequalityParams, PerturbationSpec, inner_derivation
from derivlab.stability import make_instance

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def record_criterion():
    def record(number, title, ok, detail=""):
        ACCEPTANCE_LINES.append(f"[{'PASS' if ok else 'FAIL'}] {number:>2}. {title}  {detail}")
        return ok

    return record


@functools.lru_cache(maxsize=None)
def build_instance(seed, dim, r, c=0.1, c_h=None, s=0.5, t=0.5j):
    """Certified instance with inner-derivation ground truth, cached across tests."""
    D = inner_derivation(random_unit_element(10 * seed + 1, dim))
    H = inner_derivation(random_unit_element(10 * seed + 2, dim))
    pg = PerturbationSpec("power_norm", c, r, random_unit_element(10 * seed + 3, dim))
    ph = PerturbationSpec("power_norm", c if c_h is None else c_h, r, random_unit_element(10 * seed + 4, dim))
    cal = generate_samples(10 * seed + 5, dim, 64)
    return D, H, make_instance(D, H, pg, ph, InequalityParams(s, t), cal)


@pytest.fixture
def instance_factory():
    return build_instance

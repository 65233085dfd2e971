import numpy as np
import pytest
from hypothesis import settings

from respose.geometry import Quaternion
from respose.synth import SyntheticSpec, generate_scene

settings.register_profile("respose", deadline=None, max_examples=60)
settings.load_profile("respose")


def random_quaternion(rng) -> Quaternion:
    return Quaternion.from_array(rng.normal(size=4)).normalized()


def scene_with_truth(seed: int, **kwargs):
    return generate_scene(SyntheticSpec(seed=seed, **kwargs))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def generic_scene():
    return scene_with_truth(3)


def world_constraints(scene):
    from respose.geometry import build_constraint

    return [build_constraint(m, scene.camera(m.ref_camera)) for m in scene.matches]


def truth_unknowns(truth):
    """``(q, d)`` with ``q = (1, q2, q3, q4)`` and ``d = (0; t) q``."""
    from respose.geometry import hamilton_tuple

    qa = truth.rotation.as_array()
    q = qa / qa[0]
    d = np.array(hamilton_tuple((0.0, *truth.translation), q))
    return q, d


ACCEPTANCE_REPORT: list = []


def report(criterion: str, ok: bool, detail: str) -> bool:
    ACCEPTANCE_REPORT.append(f"[{'PASS' if ok else 'FAIL'}] {criterion}: {detail}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_REPORT:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_REPORT:
            terminalreporter.write_line(line)

import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from stopeval import dataset, synth  # noqa: E402
from stopeval.geometry import CameraRig  # noqa: E402


@pytest.fixture(scope="session")
def rig():
    return CameraRig.reference_rig()


@pytest.fixture(scope="session")
def tiny_rig():
    return CameraRig.reference_rig(160, 128)


@pytest.fixture(scope="session")
def tiny_suite(tiny_rig):
    cfg = synth.SuiteConfig(n_frames=6, seed=5, reflective_fraction=0.5, noise=synth.NoiseSpec(0.1, 0.0, 0.3))
    return dataset.Suite(tuple(synth.random_suite(cfg)), tiny_rig)


@pytest.fixture(scope="session")
def tiny_dataset(tmp_path_factory, tiny_suite):
    root = tmp_path_factory.mktemp("tiny") / "ds"
    dataset.generate_dataset(tiny_suite, root, seed=0)
    return root


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)

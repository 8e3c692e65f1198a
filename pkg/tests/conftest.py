import sys
from pathlib import Path

import pytest

TESTS_DIR = Path(__file__).parent
ROOT = TESTS_DIR.parent
FIXTURES = ROOT / "fixtures"

sys.path.insert(0, str(TESTS_DIR))

from showrunner.config import MuseProfile, ShowConfig, load_muse_profiles
from showrunner.engine import ShowEngine
from showrunner.imaging import procedural_image, procedural_sketch
from showrunner.oracle import Move, MoveLibrary
from showrunner.pose import canonical_pose
from showrunner.pose_metrics import PoseFrame, PoseSequence


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


def make_profiles(n: int = 7, pose_library_size: int = 1) -> dict[int, MuseProfile]:
    profiles = {}
    for m in range(1, n + 1):
        profiles[m] = MuseProfile(
            muse_id=m,
            name=f"muse-{m}",
            style_ref_png=procedural_image(64, 48, f"style-{m}"),
            garment_ref_png=procedural_image(64, 48, f"garment-{m}"),
            frieze_png=procedural_image(200, 120, f"frieze-{m}"),
            fallback_png=procedural_image(320, 240, f"fallback-{m}"),
            pose_library=[canonical_pose() for _ in range(pose_library_size)],
        )
    return profiles


def make_library(count: int = 12) -> MoveLibrary:
    base = canonical_pose()
    moves = []
    for i in range(count):
        frames = []
        for k in range(5):
            p = base.copy()
            p.points[:, 0] += 0.03 * ((i % 4) + 1) * (k % 2)
            p.points[:, 1] += 0.01 * (k % 3)
            frames.append(PoseFrame(t_s=0.5 * k, pose=p))
        moves.append(Move(f"m{i:02d}", f"figure {chr(97 + i)}", PoseSequence(frames)))
    return MoveLibrary(moves)


def make_engine(**config_overrides) -> ShowEngine:
    defaults = dict(show_id="t", seed=5, mock_latencies_ms={})
    defaults.update(config_overrides)
    config = ShowConfig(**defaults)
    return ShowEngine(config, make_profiles(), make_library(), virtual=True)


def sketch(seed: int = 0, w: int = 320, h: int = 240) -> bytes:
    return procedural_sketch(w, h, seed)


@pytest.fixture
def profiles():
    return make_profiles()


@pytest.fixture
def library():
    return make_library()


@pytest.fixture(scope="session")
def sample_profiles():
    return load_muse_profiles(FIXTURES / "muse_profiles.json")


@pytest.fixture(scope="session")
def sample_library():
    return MoveLibrary.load(FIXTURES / "move_library.json", 12)

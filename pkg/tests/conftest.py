import numpy as np
import pytest

from radar_aplanc.rangeproc import build_range_matrix, select_center_bin
from radar_aplanc.sim import SceneConfig, simulate_if_signals


def tone(freq_hz, rate_hz=120.0, seconds=30.0, amp=1.0, phase=0.0):
    t = np.arange(int(round(seconds * rate_hz))) / rate_hz
    return amp * np.sin(2 * np.pi * freq_hz * t + phase)


@pytest.fixture(scope="session")
def physics_scene():
    """Noiseless single target at 0.6 m, 3e-4 m chest motion at 72 bpm, 30 s."""
    cfg = SceneConfig(
        target_distance_m=0.6,
        chest_amp_m=3e-4,
        heart_rate_bpm=72.0,
        resp_amp_m=0.0,
        snr_db=float("inf"),
        n_chirps=3600,
    )
    cube, gt = simulate_if_signals(cfg)
    m = build_range_matrix(cube, cfg)
    return cfg, cube, gt, m, select_center_bin(m)


# one PASS/FAIL line per acceptance criterion, filled in by test_acceptance.py
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def acceptance():
    def record(key: str, ok: bool, detail: str) -> bool:
        ACCEPTANCE[key] = (bool(ok), detail)
        print(f"criterion {key}: {'PASS' if ok else 'FAIL'} {detail}")
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.rstrip("abcdefgh")), k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key:<3} {'PASS' if ok else 'FAIL'}  {detail}")

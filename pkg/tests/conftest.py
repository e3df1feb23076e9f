import json

import numpy as np
import pytest

from emostyle import corpus, dsp, synthetic

# happy clips carry low-band noise, sad clips high-band noise
MOCK_BANDS = {"HAP": (100, 900), "SAD": (3000, 6000)}

TOY_CONFIG = {
    "melgan": {"seg_frames": 32, "epochs": 2},
    "melgan_data": {"toy": True, "toy_segments": 32},
    "corpus": {"test_per_class": 3},
    "classifier": {"epochs": 30, "lr": 0.001},
    "style": {"steps": 10, "n_filters": 8},
    "dsp": {"griffin_lim_iters": 4},
}


def write_mock_cremad(root, per_class=8, seconds=1.0, seed=0):
    rng = np.random.default_rng(seed)
    (root / "cremad").mkdir(parents=True, exist_ok=True)
    for i in range(per_class):
        for code, (lo, hi) in MOCK_BANDS.items():
            band = synthetic.band_noise(seconds, lo, hi, rng=rng).samples
            bed = 0.01 * rng.standard_normal(band.size)  # keeps every mel bin above the dB floor
            clip = dsp.AudioClip(dsp.peak_normalize(band + bed))
            corpus.write_wav(root / "cremad" / f"10{i:02d}_IEO_{code}_XX.wav", clip)
    return root


@pytest.fixture(scope="session")
def mock_corpus(tmp_path_factory):
    return write_mock_cremad(tmp_path_factory.mktemp("corpus"))


@pytest.fixture(scope="session")
def toy_config(tmp_path_factory):
    path = tmp_path_factory.mktemp("cfg") / "toy.json"
    path.write_text(json.dumps(TOY_CONFIG))
    return path


# acceptance summary ----------------------------------------------------------
_CRITERIA = {}  # number -> [title, passed, seconds]


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion checked by this test")


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    number, title = marker.args
    entry = _CRITERIA.setdefault(number, [title, True, 0.0])
    if report.failed:
        entry[1] = False
    if report.when == "call":
        entry[2] += report.duration


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        title, passed, seconds = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {title}  ({seconds:.1f} s)")

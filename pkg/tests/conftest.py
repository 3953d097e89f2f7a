import pytest

from nasran.lstm_core import TrainConfig
from nasran.ric_sim import ScenarioConfig, SearchCache
from nasran.traffic import TraceConfig

TINY_TEXT = """\
scenario_id = tiny
W = 8
scale = 0.125
online_steps = 300
rapp_period = 240
search_delay = 5
refresh_epochs = 1
refresh_history = 480

[trace]
duration_steps = 1440
critical_windows = 300:60, 700:60

[train]
epochs = 1
batch_size = 64
lr = 0.003
"""

TINY = ScenarioConfig(
    scenario_id="tiny", W=8, scale=0.125, online_steps=300, rapp_period=240, search_delay=5,
    refresh_epochs=1, refresh_history=480,
    trace=TraceConfig(duration_steps=1440, critical_windows=((300, 60), (700, 60))),
    train=TrainConfig(epochs=1, batch_size=64, lr=3e-3),
)


@pytest.fixture(scope="session")
def tiny_cfg():
    return TINY


@pytest.fixture(scope="session")
def tiny_scenario_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("scenario") / "tiny.cfg"
    path.write_text(TINY_TEXT)
    return path


@pytest.fixture(scope="session")
def search_cache():
    return SearchCache()

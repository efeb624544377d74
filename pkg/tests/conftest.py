import sys
from pathlib import Path

import pytest
from hypothesis import settings

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

from tdlgm.generator import DlgmConfig, TdlgmConfig  # noqa: E402


@pytest.fixture
def small_tdlgm():
    return TdlgmConfig(layers=3, hidden=3, latent=2, window_m=3, out_hidden=(3,), rec_hidden=3)


@pytest.fixture
def small_dlgm():
    return DlgmConfig(layers=3, hidden=3, latent=2, history=3, out_hidden=(3,))

"""Shared fixtures: isolate user defaults and the run logger per test"""

import pytest

from cqrsketch.config import DATA_DIR_ENV, reset_data_manager
from cqrsketch.utils.logging import CQRLogger


@pytest.fixture(autouse=True)
def isolated_user_data(tmp_path, monkeypatch):
    """Point the user data dir at an empty temp dir so local overrides never leak in"""
    user_dir = tmp_path / "user-data"
    monkeypatch.setenv(DATA_DIR_ENV, str(user_dir))
    reset_data_manager()
    yield user_dir
    reset_data_manager()
    CQRLogger.cleanup()

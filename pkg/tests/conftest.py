import pytest

from app.protocol import ModelBounds


@pytest.fixture
def one_server():
    return ModelBounds.of(1, max_term=1, max_log_len=1, max_config_version=1)


@pytest.fixture
def two_servers():
    return ModelBounds.of(2, max_term=2, max_log_len=1, max_config_version=2)


@pytest.fixture
def three_servers():
    return ModelBounds.of(3, max_term=2, max_log_len=1, max_config_version=2)

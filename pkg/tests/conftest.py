import pytest

from tracetypes.model import AnalysisConfig


@pytest.fixture
def cfg():
    return AnalysisConfig()

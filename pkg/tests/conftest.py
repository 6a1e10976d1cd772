import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fixtures import build_f_geo, build_f_obj, build_f_sales  # noqa: E402


@pytest.fixture
def f_obj():
    return build_f_obj()


@pytest.fixture
def f_geo():
    return build_f_geo()


@pytest.fixture
def f_sales():
    return build_f_sales()

import stat

import pytest

from forge_fixtures import STUB_TOOL_PATH


@pytest.fixture(scope="session")
def stub_tool():
    mode = STUB_TOOL_PATH.stat().st_mode
    STUB_TOOL_PATH.chmod(mode | stat.S_IXUSR | stat.S_IXGRP | stat.S_IXOTH)
    return str(STUB_TOOL_PATH)

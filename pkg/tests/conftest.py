import httpx
import pytest

from toepsense.cli import InProcessTransport
from toepsense.service import app


@pytest.fixture(scope="session")
def client():
    with httpx.Client(
        transport=InProcessTransport(app), base_url="http://test", timeout=None
    ) as c:
        yield c

import pytest


def pytest_addoption(parser):
    parser.addoption("--paper-scale", action="store_true", default=False,
                     help="run the full-size experiment grids (hours)")


@pytest.fixture(scope="session")
def paper_scale(request):
    return request.config.getoption("--paper-scale")

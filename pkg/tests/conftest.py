import pytest

from slants import _backend


@pytest.fixture(params=["python", "compiled"])
def backend(request):
    """Run the test once per kernel backend, restoring the default after."""
    name = request.param
    if name not in _backend.available():
        pytest.skip(f"backend {name!r} not built")
    previous = _backend.active
    module = _backend.use(name)
    yield module
    _backend.active = previous

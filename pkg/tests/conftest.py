import pytest
from hypothesis import settings

# numba kernels compile (or load from cache) on first call; keep hypothesis from
# timing that against the first example
settings.register_profile("default", deadline=None, max_examples=100)
settings.load_profile("default")


def pytest_collection_modifyitems(items):
    # hypothesis-driven tests check invariants over many draws; worked examples
    # are everything else
    for item in items:
        if getattr(getattr(item, "obj", None), "is_hypothesis_test", False):
            item.add_marker(pytest.mark.property)

import pytest

from dampreg.verify import DEFAULT_SEED, run_suite, standard_suite


@pytest.fixture(scope="session")
def suite_report():
    """The standard suite, run once per session; entries keyed by name."""
    specs = standard_suite()
    return {s.name: (s, e) for s, e in zip(specs, run_suite(specs, DEFAULT_SEED))}

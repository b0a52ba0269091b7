import pytest

from pded import solver


@pytest.fixture(scope="session")
def dataset_cache():
    """Generate benchmark datasets at most once per test session."""
    cache = {}

    def get(name, seed=0):
        key = (name, seed)
        if key not in cache:
            cache[key] = solver.generate_named(name, seed)
        return cache[key]

    return get


@pytest.fixture(scope="session")
def fisher_dataset(dataset_cache):
    return dataset_cache("fisher")


@pytest.fixture(scope="session")
def data_dir(tmp_path_factory, dataset_cache):
    """Directory with saved .pded files for engine/CLI tests."""
    root = tmp_path_factory.mktemp("datasets")
    for name in ("fisher", "burgers", "allen_cahn"):
        solver.save_dataset(dataset_cache(name), root / f"{name}.pded")
    return root

import pytest

from reccheck.dataset import Catalog, Interaction, ItemMeta, Session, make_dataset
from reccheck.syngen import SynSpec, generate_data


_criteria = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        measured = "; ".join(f"{k}={v}" for k, v in item.user_properties)
        _criteria.append((marker.args[0], marker.args[1], rep.passed, measured))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n, title, passed, measured in sorted(_criteria):
        line = f"criterion {n:>2}  {'PASS' if passed else 'FAIL'}  {title}"
        terminalreporter.write_line(line + (f"  [{measured}]" if measured else ""))


def to_dataset(data, **split):
    interactions = [Interaction(r["session_id"], r["item_id"], r["timestamp"]) for r in data.interactions]
    catalog = Catalog(
        ItemMeta(r["item_id"], r["price"], r["brand"], tuple(r["category_path"].split(">")))
        for r in data.catalog
    )
    return make_dataset(interactions, catalog, **split)


def sessions(*item_lists, start=0):
    """Sessions s0, s1, ... with one timestamp per item."""
    out = []
    for n, items in enumerate(item_lists):
        ts = tuple(start + 1000 * n + i for i in range(len(items)))
        out.append(Session(f"s{n}", tuple(items), ts))
    return tuple(out)


@pytest.fixture(scope="session")
def clustered():
    return generate_data(SynSpec(preset="clustered", seed=42))


@pytest.fixture(scope="session")
def clustered_dataset(clustered):
    return to_dataset(clustered, test_fraction=0.2)


@pytest.fixture(scope="session")
def zipf_data():
    return generate_data(SynSpec(preset="zipf", n_items=300, n_sessions=4000, seed=7))


@pytest.fixture(scope="session")
def zipf_dataset(zipf_data):
    return to_dataset(zipf_data, test_fraction=0.2)

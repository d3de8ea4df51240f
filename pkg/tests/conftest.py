import pytest

from fusionchain.core.graph import Graph


def path_graph(m: int) -> Graph:
    """Path 0-1-...-(m-1)."""
    return Graph.from_edges([(i, i + 1) for i in range(m - 1)], range(m))


@pytest.fixture
def single_edge():
    """Target that a single resource state already covers."""
    return path_graph(2)


@pytest.fixture
def path3():
    """Three-vertex path: one fusion in either fusion type."""
    return path_graph(3)


@pytest.fixture
def path4():
    return path_graph(4)


@pytest.fixture
def path5():
    """Five-vertex path used for the fusion-order comparison."""
    return path_graph(5)


@pytest.fixture
def triangle():
    return Graph.from_edges([(0, 1), (0, 2), (1, 2)])


@pytest.fixture
def k4():
    return Graph.from_edges([(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)])


@pytest.fixture
def star3():
    """Star with center 0 and leaves 1, 2, 3."""
    return Graph.from_edges([(0, 1), (0, 2), (0, 3)])

import numpy as np
import pytest

from basic_cd.graph import BipartiteAdjacency, SymmetricAdjacency


def graph1(n, edges):
    """Primary graph from 1-based edge pairs, as written in the examples."""
    return SymmetricAdjacency.from_edges(n, [(i - 1, j - 1) for i, j in edges])


def planted_graph(sizes, p_in, p_out, seed):
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(1, len(sizes) + 1), sizes)
    P = np.where(labels[:, None] == labels[None, :], p_in, p_out).astype(float)
    np.fill_diagonal(P, 0.0)
    iu, ju = np.triu_indices(len(labels), 1)
    hit = rng.random(len(iu)) < P[iu, ju]
    return SymmetricAdjacency.from_edges(len(labels), np.stack([iu[hit], ju[hit]], 1)), labels


@pytest.fixture
def triangle():
    return graph1(3, [(1, 2), (2, 3), (1, 3)])


ACCEPTANCE_LINES: list[str] = []


def record_criterion(number, title, passed, detail):
    line = f"criterion {number} {'PASS' if passed else 'FAIL'}: {title} ({detail})"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[1])):
            terminalreporter.write_line(line)

import random
import sys
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from hcmvne import SubstrateNetwork, VirtualNetwork

sys.path.insert(0, str(Path(__file__).parent))

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

DATA = Path(__file__).parent / "data"


def random_vn(rng: random.Random, n: int, p: float = 0.5, cpu=(1, 30), bw=(1, 40)) -> VirtualNetwork:
    """Connected random VN: a random tree plus extra edges with probability p."""
    vn = VirtualNetwork()
    for i in range(n):
        vn.add_node(i, rng.randint(*cpu))
    for i in range(1, n):
        vn.add_link(rng.randrange(i), i, rng.randint(*bw))
    for i in range(n):
        for j in range(i + 1, n):
            if vn.link_between(i, j) is None and rng.random() < p:
                vn.add_link(i, j, rng.randint(*bw))
    return vn


def random_sn(rng: random.Random, n: int, p: float = 0.5, cpu=(10, 60), bw=(10, 80)) -> SubstrateNetwork:
    sn = SubstrateNetwork()
    for i in range(n):
        sn.add_node(i, rng.randint(*cpu))
    for i in range(1, n):
        sn.add_link(rng.randrange(i), i, rng.randint(*bw))
    for i in range(n):
        for j in range(i + 1, n):
            if sn.link_between(i, j) is None and rng.random() < p:
                sn.add_link(i, j, rng.randint(*bw))
    return sn


def two_triangles(ad_bw=10, tri_bw=20, cpu=10) -> VirtualNetwork:
    """Triangles a-b-c and d-e-f joined by (a, d)."""
    links = [("a", "b", tri_bw), ("b", "c", tri_bw), ("a", "c", tri_bw),
             ("d", "e", tri_bw), ("e", "f", tri_bw), ("d", "f", tri_bw), ("a", "d", ad_bw)]
    return VirtualNetwork.build({v: cpu for v in "abcdef"}, links)


@pytest.fixture
def fig_vn():
    return two_triangles()


# one line per acceptance criterion, repeated in the terminal summary
ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])

import numpy as np
import pytest

from pardiqkd import quantum as qm

ACCEPTANCE_LINES: list[str] = []


def random_unitary(d, rng):
    z = (rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_projective(d, k, rng):
    """k orthogonal projectors summing to identity, ranks split as evenly as possible."""
    u = random_unitary(d, rng)
    ranks = np.array_split(np.arange(d), k)
    return np.stack([u[:, r] @ u[:, r].conj().T for r in ranks])


def random_density(d, rng, rank=None):
    rank = d if rank is None else rank
    g = rng.normal(size=(d, rank)) + 1j * rng.normal(size=(d, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_strategy(game, rng, dims=(2, 2), mixed=True):
    da, db = dims
    d = da * db
    rho = random_density(d, rng) if mixed else qm.ket_to_dm(random_unitary(d, rng)[:, 0])
    pa = {x: random_projective(da, len(game.answers_a), rng) for x in game.questions_a}
    pb = {y: random_projective(db, len(game.answers_b), rng) for y in game.questions_b}
    return qm.Strategy(rho, pa, pb, dims)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)

from functools import lru_cache

from qtlnet.genetics import calc_genoprob
from qtlnet.simulation import simulate_benchmark


@lru_cache(maxsize=None)
def benchmark_replicate(seed: int, signal: str = "strong", n: int = 500):
    """Cached ``(cross, model, genoprobs)`` for one simulated replicate."""
    cross, model = simulate_benchmark(n, signal, seed)
    return cross, model, calc_genoprob(cross, step=2.0, error_rate=1e-4)


def random_t3_dataset(seed: int, n: int = 200):
    """Three traits on a random DAG, each trait with a QTL on its own chromosome
    with probability 0.7. Returns ``(phenotypes, genoprobs, model)``."""
    import numpy as np

    from qtlnet.genetics import GeneticMap
    from qtlnet.graph import enumerate_dags
    from qtlnet.hcgr import HcgrModel, QtlEffect
    from qtlnet.simulation import simulate_cross

    rng = np.random.default_rng(seed)
    dags = enumerate_dags(3)
    dag = dags[int(rng.integers(len(dags)))]
    beta = np.zeros((3, 3))
    for u, v in dag.edges:
        beta[v, u] = rng.choice([-1, 1]) * rng.uniform(0.2, 0.8)
    gmap = GeneticMap.equally_spaced(3, 100.0, 10)
    qtls = []
    for t in range(3):
        if rng.random() < 0.7:
            c = gmap.chromosome(str(t + 1))
            qtls.append((QtlEffect(c.name, float(c.positions[4]), rng.uniform(0.3, 0.8), rng.uniform(0, 0.3)),))
        else:
            qtls.append(())
    model = HcgrModel(dag, np.zeros(3), beta, np.ones(3), tuple(qtls))
    cross = simulate_cross(model, gmap, n, rng.integers(2**32))
    return cross.phenotypes, calc_genoprob(cross, step=2.0), model


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)

import numpy as np
import pytest

# Paired buccal-swab replicate tables: no filter, loose filter, strict filter.
SWAB_NONE = [[8_580_543, 400, 61], [671, 8_317, 96], [79, 61, 5_903]]
SWAB_LOOSE = [[7_537_513, 59, 0], [45, 7_434, 16], [1, 16, 5_227]]
SWAB_STRICT = [[4_978_416, 0, 0], [1, 1_875, 1], [0, 1, 3_340]]


def trinomial_loglik(w, counts):
    """Independent log-likelihood used by the oracles (direct polynomial form)."""
    w = np.asarray(w, dtype=float)
    a = 1.0 - w
    n_d, n_c, n_o = counts
    out = np.zeros_like(w)
    with np.errstate(divide="ignore"):
        if n_d:
            out = out + n_d * np.log(w**4 + 4 * w**2 * a**2 + a**4)
        if n_c:
            out = out + n_c * np.log(2 * w**2 * a**2)
        if n_o:
            out = out + n_o * np.log(4 * w**3 * a + 4 * w * a**3)
    return out


def dense_grid_posterior_mean(counts, upper=0.5, n_nodes=2_000_001):
    """Posterior mean under U(0, 0.5) by the trapezoid rule on a uniform grid.

    ``upper`` truncates the grid for very peaked likelihoods; the oracle
    checks that the discarded region lies at least 40 nats below the peak.
    """
    w = np.linspace(0.0, upper, n_nodes)
    ll = trinomial_loglik(w, counts)
    peak = ll.max()
    if upper < 0.5:
        assert trinomial_loglik(np.array(upper), counts) < peak - 40, "oracle grid truncated too early"
    f = np.exp(ll - peak)
    return float(np.trapezoid(w * f, w) / np.trapezoid(f, w))


@pytest.fixture
def swab_none():
    return np.array(SWAB_NONE)


@pytest.fixture
def swab_loose():
    return np.array(SWAB_LOOSE)


@pytest.fixture
def swab_strict():
    return np.array(SWAB_STRICT)


def pytest_terminal_summary(terminalreporter):
    import sys

    module = sys.modules.get("test_acceptance")
    if module is None or not module.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(module.RESULTS):
        terminalreporter.write_line(module.RESULTS[number])

"""High-precision reference evaluations, independent of the package code."""
import mpmath as mp

mp.mp.dps = 50


def h(x):
    x = mp.mpf(x)
    if x == 0 or x == 1:
        return mp.mpf(0)
    return -x * mp.log(x, 2) - (1 - x) * mp.log(1 - x, 2)


def poisson(mu, n):
    mu = mp.mpf(mu)
    return mu**n * mp.e ** (-mu) / mp.factorial(n)


def thinned(mu, eta, n, m_max=60):
    """Emit Poisson(mu), keep each photon with probability eta, brute force."""
    eta = mp.mpf(eta)
    return mp.fsum(poisson(mu, m) * mp.binomial(m, n) * eta**n * (1 - eta) ** (m - n) for m in range(n, m_max + 1))


def si(e):
    e = mp.mpf(e)
    return 1 - h((1 + 2 * mp.sqrt(e - e * e)) / 2)


def cmp_info(n, e):
    e = mp.mpf(e)
    f = 1 - e
    return 1 - (f**n + e**n) * h((1 + mp.sqrt(1 - (1 - 2 * e) ** (2 * n))) / 2)


def tagged_ratio(mu, eta, n_max=60):
    mu, eta = mp.mpf(mu), mp.mpf(eta)
    t = [mu**n * mp.e ** (-mu) * eta * (1 - eta) ** (n - 1) * n / mp.factorial(n) for n in range(1, n_max + 1)]
    return mp.fsum(t[1:]) / mp.fsum(t)


def residual_ratio(mu, eta, n0, n_max=60):
    mu, eta = mp.mpf(mu), mp.mpf(eta)
    num = mp.fsum(poisson(mu, n) for n in range(n0 + 1, n_max + 1))
    den = mp.fsum(mu**n * mp.e ** (-mu) * eta * (1 - eta) ** (n - 1) / mp.factorial(n - 1) for n in range(1, n_max + 1))
    return num / den

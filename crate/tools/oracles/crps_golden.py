#!/usr/bin/env python3
"""Reference values for the scoring rules.

Empirical CRPS via the naive O(S^2) energy form, Gaussian CRPS via the
closed form and via numerical quadrature of the integral definition,
and the optimal-spread ratio for a Gaussian predictive law.
"""

import numpy as np
from mpmath import mp, mpf, sqrt, log, erf, exp, pi, quad

mp.dps = 30


def crps_empirical_naive(samples, y):
    s = [mpf(v) for v in samples]
    y = mpf(y)
    n = len(s)
    t1 = sum(abs(v - y) for v in s) / n
    t2 = sum(abs(a - b) for a in s for b in s) / (2 * n * n)
    return t1 - t2


def phi(x):
    return exp(-x * x / 2) / sqrt(2 * pi)


def Phi(x):
    return (1 + erf(x / sqrt(2))) / 2


def crps_gaussian_closed(mu, sigma, y):
    mu, sigma, y = mpf(mu), mpf(sigma), mpf(y)
    if sigma == 0:
        return abs(y - mu)
    z = (y - mu) / sigma
    return sigma * (z * (2 * Phi(z) - 1) + 2 * phi(z) - 1 / sqrt(pi))


def crps_gaussian_quad(mu, sigma, y):
    mu, sigma, y = mpf(mu), mpf(sigma), mpf(y)

    def integrand(x):
        h = mpf(1) if x >= y else mpf(0)
        return (Phi((x - mu) / sigma) - h) ** 2

    lo, hi = mu - 12 * sigma, mu + 12 * sigma
    return quad(integrand, [lo, min(max(y, lo), hi), hi])


def main():
    print("== empirical CRPS (naive pairwise) ==")
    cases = [
        ([0.0, 2.0], 1.0),
        ([1.5], 0.25),
        ([-1.0, 0.0, 1.0, 2.0, 5.0], 0.7),
        ([0.3, -0.2, 1.1, 0.0, -2.5, 0.9, 0.4], -0.35),
    ]
    for samples, y in cases:
        v = crps_empirical_naive(samples, y)
        print(f"crps({samples}, y={y}) = {mp.nstr(v, 17)}")

    rng = np.random.default_rng(20240817)
    samples = rng.normal(0.4, 1.3, size=100)
    y = 0.9
    v = crps_empirical_naive(samples, y)
    print(f"crps(seed-20240817 normal(0.4,1.3) S=100, y=0.9) = {mp.nstr(v, 17)}")
    print(f"  first5 = {[float(x) for x in samples[:5]]}")

    print("\n== Gaussian CRPS closed form vs quadrature ==")
    gauss_cases = [(0, 1, 0), (0, 1, 1), (0.3, 1.7, -0.5), (2.0, 0.25, 2.1),
                   (-1.0, 3.0, 4.0)]
    for mu, sigma, y in gauss_cases:
        c = crps_gaussian_closed(mu, sigma, y)
        q = crps_gaussian_quad(mu, sigma, y)
        print(f"crps_gauss({mu},{sigma},{y}) closed={mp.nstr(c, 17)} "
              f"quad={mp.nstr(q, 17)} diff={mp.nstr(abs(c - q), 3)}")

    print("\n== optimal spread for Gaussian predictive ==")
    ratio = 1 / sqrt(log(2))
    print(f"1/sqrt(ln 2) = {mp.nstr(ratio, 17)}")
    # grid minimizer check: y=1, mu=0, argmin over sigma
    y, mu = mpf(1), mpf(0)
    grid = [mpf("1e-4") * i for i in range(1, 50001)]
    vals = [crps_gaussian_closed(mu, s, y) for s in grid]
    i_min = min(range(len(vals)), key=lambda i: vals[i])
    print(f"grid argmin sigma (y=1,mu=0, res 1e-4) = {mp.nstr(grid[i_min], 8)}")
    print(f"crps at grid optimum      = {mp.nstr(vals[i_min], 17)}")
    print(f"crps at exact 1/sqrt(ln2) = {mp.nstr(crps_gaussian_closed(0, ratio, 1), 17)}")
    print(f"crps at sigma=1  = {mp.nstr(crps_gaussian_closed(0, 1, 1), 17)}")
    print(f"crps at sigma=1.5= {mp.nstr(crps_gaussian_closed(0, 1.5, 1), 17)}")


if __name__ == "__main__":
    main()

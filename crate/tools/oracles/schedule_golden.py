#!/usr/bin/env python3
"""High-precision reference values for noise schedules.

Computes cumulative signal-retention products for a linear beta schedule
and the cosine-spaced inference subsequence, independently of the Rust
implementation. Output is pasted into the Rust test suite as frozen
constants.
"""

from mpmath import mp, mpf, sqrt

mp.dps = 50


def linear_beta(big_k: int, beta_start, beta_end):
    beta_start = mpf(beta_start)
    beta_end = mpf(beta_end)
    if big_k == 1:
        return [beta_start]
    step = (beta_end - beta_start) / (big_k - 1)
    return [beta_start + step * i for i in range(big_k)]


def alpha_bar(betas):
    out = []
    acc = mpf(1)
    for b in betas:
        acc *= mpf(1) - b
        out.append(acc)
    return out


def cosine_kappa(big_k: int, w: int):
    # raw_i = round(K * (1 - cos(i*pi/(2W)))), then forward pass forces
    # strict increase from below, backward pass clamps so kappa[W-1] = K.
    # The rounding is deliberately done in double precision with half away
    # from zero: the implementation contract is the IEEE f64 value, and real
    # arithmetic disagrees with it at exact .5 ties (e.g. K=7, W=3, i=2).
    import math

    def round_half_away(x: float) -> int:
        f = math.floor(x)
        return f if x - f < 0.5 else f + 1

    raw = []
    for i in range(1, w + 1):
        frac = 1.0 - math.cos(i * math.pi / (2 * w))
        raw.append(round_half_away(big_k * frac))
    kappa = []
    prev = 0
    for r in raw:
        k = max(r, prev + 1)
        kappa.append(k)
        prev = k
    kappa[-1] = big_k
    for i in range(w - 2, -1, -1):
        if kappa[i] >= kappa[i + 1]:
            kappa[i] = kappa[i + 1] - 1
    assert all(1 <= k <= big_k for k in kappa), kappa
    assert all(a < b for a, b in zip(kappa, kappa[1:])), kappa
    return kappa


def main():
    print("== linear beta K=1000, beta in [1e-4, 0.02] ==")
    ab = alpha_bar(linear_beta(1000, "1e-4", "0.02"))
    for k in (1, 2, 10, 100, 500, 999, 1000):
        print(f"alpha_bar[{k}] = {mp.nstr(ab[k - 1], 17)}")
    for k in (100, 500, 1000):
        print(f"sqrt(1 - alpha_bar[{k}]) = {mp.nstr(sqrt(1 - ab[k - 1]), 17)}")
    print(f"sqrt(alpha_bar[1000])     = {mp.nstr(sqrt(ab[999]), 17)}")
    print(f"sqrt(1-ab[500])/sqrt ratio for step 1000->500:")
    print(f"  sqrt((1-ab[500])/(1-ab[1000])) = "
          f"{mp.nstr(sqrt((1 - ab[499]) / (1 - ab[999])), 17)}")
    print(f"  sqrt(alpha_bar[500])           = {mp.nstr(sqrt(ab[499]), 17)}")

    print("\n== linear beta K=2, (0.1, 0.3) ==")
    ab2 = alpha_bar(linear_beta(2, "0.1", "0.3"))
    print("alpha_bar =", [mp.nstr(v, 17) for v in ab2])

    print("\n== linear beta K=1, (0.5, 0.5) ==")
    ab1 = alpha_bar(linear_beta(1, "0.5", "0.5"))
    print("alpha_bar =", [mp.nstr(v, 17) for v in ab1])

    print("\n== cosine kappa ==")
    for big_k, w in ((10, 10), (1000, 1), (1000, 10), (50, 10), (7, 3),
                     (1000, 50), (100, 10)):
        print(f"kappa(K={big_k}, W={w}) = {cosine_kappa(big_k, w)}")


if __name__ == "__main__":
    main()

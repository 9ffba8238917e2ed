#!/usr/bin/env python3
"""Reference instances for the forward-noising and skip-step update rules.

Each case is an independent transcription of the update formulas,
evaluated in high precision; results are frozen into the Rust tests.
"""

from mpmath import mp, mpf, sqrt

mp.dps = 50


def linear_alpha_bar(big_k, beta_start, beta_end):
    beta_start, beta_end = mpf(beta_start), mpf(beta_end)
    out, acc = [], mpf(1)
    for i in range(big_k):
        b = beta_start if big_k == 1 else beta_start + (beta_end - beta_start) * i / (big_k - 1)
        acc *= 1 - b
        out.append(acc)
    return out


def main():
    print("== forward noising, K=1, beta=0.19 (alpha_bar_1 = 0.81) ==")
    r0, eps = mpf(1), mpf(2)
    ab = mpf("0.81")
    rk = sqrt(ab) * r0 + sqrt(1 - ab) * eps
    print(f"rk = {mp.nstr(rk, 17)}")

    print("\n== clean-sample prediction, random instance ==")
    # rk, eps_hat fixed by hand; k=100 of the standard K=1000 linear schedule
    ab1000 = linear_alpha_bar(1000, "1e-4", "0.02")
    a100 = ab1000[99]
    rk, eps_hat = mpf("0.73"), mpf("-1.21")
    r0_hat = (rk - sqrt(1 - a100) * eps_hat) / sqrt(a100)
    print(f"alpha_bar[100] = {mp.nstr(a100, 17)}")
    print(f"r0_hat(rk=0.73, eps_hat=-1.21, k=100) = {mp.nstr(r0_hat, 17)}")

    print("\n== skip-step update, kappa_i=1000 -> kappa_prev=500 ==")
    a_i, a_p = ab1000[999], ab1000[499]
    r_ki, r0_hat = mpf("0.61"), mpf("-0.37")
    out = sqrt(a_p) * r0_hat + sqrt((1 - a_p) / (1 - a_i)) * (r_ki - sqrt(a_i) * r0_hat)
    print(f"step(r_ki=0.61, r0_hat=-0.37) = {mp.nstr(out, 17)}")

    print("\n== one-pass denoise from pure noise, skip-only net, W=1 ==")
    # eps_hat = r^K, so r0_hat = r^K (1 - sqrt(1-ab_K)) / sqrt(ab_K)
    coef = (1 - sqrt(1 - ab1000[999])) / sqrt(ab1000[999])
    print(f"coefficient on r^K = {mp.nstr(coef, 17)}")


if __name__ == "__main__":
    main()

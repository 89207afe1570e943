"""Reference minimizers of the block-mean proxy objective sum_j rho(s (m_j - z)).

Minimizes the objective itself (not its derivative) by golden-section search
at 40 digits. The printed values are frozen into tests/test_robust_proxy.cpp.
"""
import itertools

import mpmath as mp

from smooth_huber_oracle import conv, huber

mp.mp.dps = 40
RHO0 = conv(huber, 0)


def rho(z):
    a = abs(mp.mpf(z))
    if a <= 1:
        return RHO0 + a * a / 2
    if a >= 2:
        return mp.mpf(3) / 2 * a - mp.mpf(9) / 8
    return conv(huber, a)


def argmin(means, scale):
    f = lambda z: mp.fsum(rho(scale * (m - z)) for m in means)
    lo, hi = mp.mpf(min(means)), mp.mpf(max(means))
    g = (mp.sqrt(5) - 1) / 2
    a, b = lo + (1 - g) * (hi - lo), lo + g * (hi - lo)
    fa, fb = f(a), f(b)
    while hi - lo > mp.mpf("1e-14"):
        if fa <= fb:
            hi, b, fb = b, a, fa
            a = lo + (1 - g) * (hi - lo)
            fa = f(a)
        else:
            lo, a, fa = a, b, fb
            b = lo + g * (hi - lo)
            fb = f(b)
    return (lo + hi) / 2


if __name__ == "__main__":
    print("means [0, 1, 100], n=4, delta=1:", mp.nstr(argmin([0, 1, 100], 2), 17))
    print("means [0, 0.3, 0.5, 9], n=9, delta=2:", mp.nstr(argmin([0, 0.3, 0.5, 9], 1.5), 17))
    xs = [mp.mpf(v) for v in ("0.1", "-0.4", "2.0", "0.7", "-1.3", "5.0")]
    theta = mp.mpf("0.3")
    losses = [(x - theta) ** 2 / 2 for x in xs]
    pair_means = [(losses[i] + losses[j]) / 2 for i, j in itertools.combinations(range(6), 2)]
    print("u-stat N=6 n=2 delta=1 theta=0.3:", mp.nstr(argmin(pair_means, mp.sqrt(2)), 17))

"""Reference Gaussian expectations of the smoothed Huber derivatives.

Integrates directly over Z1 ~ N(0, 1) with mpmath, splitting at the points
where Z1 / Delta crosses +-1, +-2. Printed values are frozen into
tests/test_asymptotics.cpp.
"""
import mpmath as mp

from smooth_huber_oracle import conv, huber_d1, psi, rho2

mp.mp.dps = 20


def d1(u):
    a = abs(u)
    if a <= 1:
        return u
    if a >= 2:
        return mp.sign(u) * mp.mpf(3) / 2
    return conv(huber_d1, u)


def d2(u):
    a = abs(u)
    if a <= 1:
        return mp.mpf(1)
    if a >= 2:
        return mp.mpf(0)
    return rho2(a)


def d4(u):
    a = abs(u)
    if a <= 1 or a >= 2:
        return mp.mpf(0)
    return -mp.diff(psi, a - mp.mpf(3) / 2, 1)


def expect(f, delta):
    phi = lambda z: mp.npdf(z)
    cuts = sorted({-12, 12} | {c * delta for c in (-2, -1, 1, 2) if abs(c * delta) < 12})
    return mp.quad(lambda z: f(z) * phi(z), cuts)


def moments(delta):
    u = lambda z: z / delta
    return {
        "r2": expect(lambda z: d2(u(z)), delta),
        "r2sq": expect(lambda z: d2(u(z)) ** 2, delta),
        "r4": expect(lambda z: d4(u(z)), delta),
        "r1sq": expect(lambda z: d1(u(z)) ** 2, delta),
        "cross": expect(lambda z: d2(u(z)) * d1(u(z)) * z, delta),
        "r2sq_z1sq": expect(lambda z: d2(u(z)) ** 2 * z * z, delta),
    }


if __name__ == "__main__":
    for delta in (mp.mpf(1), mp.mpf(2)):
        m = moments(delta)
        print("delta", delta, {k: mp.nstr(v, 16) for k, v in m.items()})
        print("  inflation factor:", mp.nstr(m["r2sq"] / m["r2"] ** 2, 16))
    # Exponential-rate spec at lambda0 = 1: sigma22 = gamma = var_z1 = 1, so Z2 = Z1.
    m = moments(mp.mpf(1))
    second = m["r4"] ** 2 * m["r1sq"] / m["r2"] ** 2
    third = 2 * m["r4"] * m["cross"] / m["r2"]
    base = m["r2sq_z1sq"]
    print("exponential A2 linearized:", mp.nstr((base + second - third) / m["r2"] ** 2, 16))
    print("exponential A2 with the opposite cross-term sign:", mp.nstr((base + second + third) / m["r2"] ** 2, 16))

"""High-precision reference values for the smoothed Huber loss.

Run with mpmath; the printed constants are frozen into tests/test_smooth_loss.cpp.
"""
import mpmath as mp

mp.mp.dps = 40

def bump_raw(x):
    x = mp.mpf(x)
    if abs(x) >= mp.mpf(1) / 2:
        return mp.mpf(0)
    return mp.e ** (-4 / (1 - 4 * x * x))

Z = mp.quad(bump_raw, [-0.5, 0, 0.5])
C = 1 / Z

def psi(x):
    return C * bump_raw(x)

def huber(y):
    y = mp.mpf(y)
    if abs(y) <= mp.mpf(3) / 2:
        return y * y / 2
    return mp.mpf(3) / 2 * (abs(y) - mp.mpf(3) / 4)

def huber_d1(y):
    return max(min(mp.mpf(y), mp.mpf(1.5)), mp.mpf(-1.5))

def conv(f, z):
    z = mp.mpf(z)
    pts = [-0.5, 0.5]
    for kink in (z - 1.5, z + 1.5):
        if -0.5 < kink < 0.5:
            pts.append(kink)
    pts = sorted(set(pts))
    return mp.quad(lambda x: f(z - x) * psi(x), pts)

def rho2(z):
    z = mp.mpf(z)
    lo, hi = max(z - 1.5, -0.5), min(z + 1.5, 0.5)
    if lo >= hi:
        return mp.mpf(0)
    return mp.quad(psi, [lo, hi])

if __name__ == "__main__":
    print("C =", mp.nstr(C, 20))
    print("rho(0) =", mp.nstr(conv(huber, 0), 20))
    print("int x^2/2 psi =", mp.nstr(mp.quad(lambda x: x * x / 2 * psi(x), [-0.5, 0.5]), 20))
    for z in ["1.25", "1.5", "1.75", "1.1", "1.9", "3"]:
        print("z=%s rho=%s d1=%s d2=%s" % (z, mp.nstr(conv(huber, z), 20), mp.nstr(conv(huber_d1, z), 20), mp.nstr(rho2(z), 20)))
    for z in ["1.25", "1.5", "1.75"]:
        d3 = mp.diff(rho2, mp.mpf(z), 1)
        d4 = mp.diff(rho2, mp.mpf(z), 2)
        d5 = mp.diff(rho2, mp.mpf(z), 3)
        print("z=%s d3=%s d4=%s d5=%s" % (z, mp.nstr(d3, 16), mp.nstr(d4, 16), mp.nstr(d5, 16)))

"""Independent high-precision reference values frozen into the test suite.

Uses mpmath only (no package code) so the numbers do not share code paths
with the implementation. Run ``python tools/oracles.py`` to regenerate.
"""
import mpmath as mp

mp.mp.dps = 40


def franke(x1, x2, x3):
    a, b, c = 9 * x1, 9 * x2, 9 * x3
    return (mp.mpf("0.75") * mp.exp(-((a - 2) ** 2 + (b - 2) ** 2 + (c - 2) ** 2) / 4)
            + mp.mpf("0.75") * mp.exp(-(a + 1) ** 2 / 49 - (b + 1) / 10 - (c + 1) / 10)
            + mp.mpf("0.5") * mp.exp(-((a - 7) ** 2 + (b - 3) ** 2 + (c - 5) ** 2) / 4)
            - mp.mpf("0.2") * mp.exp(-(a - 4) ** 2 - (b - 7) ** 2 - (c - 5) ** 2))


def wendland(u):
    return (1 - u) ** 8 * (32 * u ** 3 + 25 * u ** 2 + 8 * u + 1) if u < 1 else mp.mpf(0)


def wendland_coefficient(k):
    # phi_hat_k = 2 pi int_{-1}^{1} phi(t) P_k(t) dt, support t >= 1/2
    f = lambda t: wendland(mp.sqrt(2 - 2 * t)) * mp.legendre(k, t)
    return 2 * mp.pi * mp.quad(f, [mp.mpf("0.5"), mp.mpf("0.75"), 1])


def sobolev_truncation(gamma, tol):
    # smallest K with sum_{k>K} (2k+1) (k(k+1)+1)^-gamma / (4 pi) <= tol, by the
    # integral bound (K^2+K+1)^(1-gamma) / ((gamma-1) 4 pi)
    K = 0
    while (K * K + K + 1) ** (1 - gamma) / ((gamma - 1) * 4 * mp.pi) > tol:
        K += 1
    return K


def chordal_gaussian_coefficient(k, sigma):
    f = lambda t: mp.exp(-(1 - t) / sigma ** 2) * mp.legendre(k, t)
    return 2 * mp.pi * mp.quad(f, [-1, 0, 1])


if __name__ == "__main__":
    print("franke(0,0,1) =", mp.nstr(franke(0, 0, 1), 20))
    print("franke(1,0,0) =", mp.nstr(franke(1, 0, 0), 20))
    s = 1 / mp.sqrt(3)
    print("franke(s,s,s) =", mp.nstr(franke(s, s, s), 20))
    for k in (0, 1, 2, 5, 10):
        print(f"wendland phi_hat[{k}] =", mp.nstr(wendland_coefficient(k), 20))
    for k in (0, 3, 8):
        print(f"chordal gaussian sigma=0.5 phi_hat[{k}] =",
              mp.nstr(chordal_gaussian_coefficient(k, mp.mpf("0.5")), 20))
    print("10380^(-2/3) =", mp.nstr(mp.mpf(10380) ** (-mp.mpf(2) / 3), 20))
    print("10380^(1/3) =", mp.nstr(mp.cbrt(10380), 20))
    print("sobolev K(gamma=2, 1e-10) =", sobolev_truncation(2, mp.mpf("1e-10")))
    print("sobolev K(gamma=3, 1e-10) =", sobolev_truncation(3, mp.mpf("1e-10")))

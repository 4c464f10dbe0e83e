"""High-precision Mittag-Leffler values by the defining power series.

The working precision is raised above the size of the largest term so the
alternating series loses nothing to cancellation.
"""
import mpmath as mp

CASES = [
    (0.4, -3.0),
    (0.5, -0.5),
    (0.5, -1.5),
    (0.5, -3.0),
    (0.2, -1.0),
    (0.2, -2.0),
    (0.2, -4.0),
    (0.4, -13.0),
    (0.8, -20.0),
    (0.9, -0.7),
    (0.3, 2.0),
]


def ml(alpha, x):
    a = mp.mpf(alpha)
    z = mp.mpf(x)
    peak = max(k * mp.log10(abs(z)) - mp.loggamma(a * k + 1) / mp.log(10) for k in range(0, 20000, 10))
    with mp.workdps(int(peak) + 40):
        total = mp.mpf(0)
        k = 0
        while True:
            term = z**k / mp.gamma(a * k + 1)
            total += term
            if k > 10 and abs(term) < mp.mpf(10) ** (-45):
                break
            k += 1
        return +total


if __name__ == "__main__":
    mp.mp.dps = 30
    for alpha, x in CASES:
        print(f"({alpha!r}, {x!r}, {mp.nstr(ml(alpha, x), 17)}),")

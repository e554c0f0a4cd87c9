"""Regenerates oracles.json from slow, FFT-free reference computations.

The values are frozen in the repository; tests compare the package against
them.  Nothing here imports the package's transform or flux code.
"""

import cmath
import json
import math
from pathlib import Path

import numpy as np

M = 16
LAM = 1.0
V = (2 * math.pi * LAM) ** 2
MODES = [(1, 2), (-3, 1), (2, -2)]
EDGE_MODES = [(6, 5), (-7, 3), (5, -6)]
# a + c = b + d, so the quartet exchanges action between its members
QUARTET = [(1, 0), (2, 1), (0, 1), (3, 0)]


def coefficients(seed, modes):
    rng = np.random.default_rng(seed)
    return {n: complex(rng.normal(), rng.normal()) * V for n in modes}


def field_values(coef):
    """u(x) on the m x m grid by direct summation."""
    dx = 2 * math.pi * LAM / M
    u = [[0j] * M for _ in range(M)]
    for i in range(M):
        for j in range(M):
            x, y = i * dx, j * dx
            s = 0j
            for (a, b), c in coef.items():
                s += c * cmath.exp(1j * (a * x + b * y) / LAM)
            u[i][j] = s / V
    return u


def brute_dft(u, n):
    """u_hat(n) = int u e^{-ik.x} dx by the rectangle rule (exact for trig polynomials)."""
    dx = 2 * math.pi * LAM / M
    s = 0j
    for i in range(M):
        for j in range(M):
            s += u[i][j] * cmath.exp(-1j * (n[0] * i * dx + n[1] * j * dx) / LAM)
    return s * dx * dx


def triple_convolution(coef):
    out = {}
    for a, ca in coef.items():
        for b, cb in coef.items():
            for c, cc in coef.items():
                n = (a[0] - b[0] + c[0], a[1] - b[1] + c[1])
                if all(abs(t) < M // 2 for t in n):
                    out[n] = out.get(n, 0j) + ca * cb.conjugate() * cc / V**2
    return out


def quartic_mean(coef):
    tot = 0j
    items = list(coef.items())
    for a, ca in items:
        for b, cb in items:
            for c, cc in items:
                for d, cd in items:
                    if a[0] - b[0] + c[0] - d[0] == 0 and a[1] - b[1] + c[1] - d[1] == 0:
                        tot += ca * cb.conjugate() * cc * cd.conjugate()
    return (tot / V**4).real


def psi(r):
    def phi(t):
        return math.exp(-1.0 / t) if t > 0 else 0.0
    a, b = phi(2 - r), phi(r - 1)
    return a / (a + b)


def flux_wa_oracle(coef, N):
    F = triple_convolution(coef)
    tot = 0.0
    for n, c in coef.items():
        k = math.hypot(*n) / LAM
        w = (1 - psi(k / N)) ** 2
        tot += w * (c.conjugate() * F.get(n, 0j)).imag
    return tot / V**2


def flux_ke_oracle(coef, N):
    F = triple_convolution(coef)
    tot = 0.0
    for n, c in coef.items():
        k = math.hypot(*n) / LAM
        tot += k * k * psi(k / N) ** 2 * (c.conjugate() * F.get(n, 0j)).imag
    return tot / V**2


def enc(z):
    return [z.real, z.imag]


def main():
    coef = coefficients(11, MODES)
    u = field_values(coef)
    edge = coefficients(12, EDGE_MODES)
    quartet = coefficients(13, QUARTET)
    probe = [(1, 2), (0, 0), (-3, 1), (4, 4)]
    data = {
        "grid": {"d": 2, "lam": LAM, "m": M},
        "modes": [list(n) for n in MODES],
        "coef": [enc(coef[n]) for n in MODES],
        "dft_probe": [[list(n), enc(brute_dft(u, n))] for n in probe],
        "mean_abs2": sum(abs(v) ** 2 for row in u for v in row) / M**2,
        "edge_modes": [list(n) for n in EDGE_MODES],
        "edge_coef": [enc(edge[n]) for n in EDGE_MODES],
        "edge_cubic": [[list(n), enc(z)] for n, z in sorted(triple_convolution(edge).items())],
        "edge_quartic_mean": quartic_mean(edge),
        "flux_wa_N2": flux_wa_oracle(coef, 2.0),
        "flux_wa_edge_N2": flux_wa_oracle(edge, 2.0),
        "quartet_modes": [list(n) for n in QUARTET],
        "quartet_coef": [enc(quartet[n]) for n in QUARTET],
        "flux_wa_quartet": {str(N): flux_wa_oracle(quartet, N) for N in (1.0, 2.0)},
        "flux_ke_quartet": {str(N): flux_ke_oracle(quartet, N) for N in (1.0, 2.0)},
        # closed forms
        "ou_single_mode": {"nu": 0.1, "sigma": 0.5, "k": 1.0, "w": 1.0, "variance": 0.25 * 1.0 / 0.4},
        "ar1": {"phi": 0.9, "innovation_sd": 1.0, "n": 100000,
                "stderr": math.sqrt(1 / (1 - 0.81) * (1.9 / 0.1) / 100000)},
    }
    out = Path(__file__).with_name("oracles.json")
    out.write_text(json.dumps(data, indent=1, sort_keys=True) + "\n")


if __name__ == "__main__":
    main()

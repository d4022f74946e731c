"""Independent hand computation of the global entropy-decay constants.

Canonical 2-node model: omega = 1, W = 0, V = 0, beta = 1, rho0 = (0.9, 0.1).
Everything is written out from the closed forms, with mpmath at 50 digits, so the
numbers do not share any code with the C++ implementation. The values printed
here are frozen in tests/test_rates.cpp.
"""

from mpmath import mp, mpf, sqrt, log, exp

mp.dps = 50

n = 2
beta = mpf(1)
omega = mpf(1)
rho0 = (mpf("0.9"), mpf("0.1"))

# Invariant region floor.
M = exp(2 * mpf(0))  # max |V_i| + |W_ij| = 0
s = 1 / (1 + (2 * M) ** (1 / beta))
m = mpf(1) / 2 * s ** (n - 2) * min(s, min(rho0))

# Spectra: L^ = [[1,-1],[-1,1]] -> {0, 2}.
lam_sec = 2 * omega
lam_max = 2 * omega
lam_min_hess = beta          # lambda_min(W) + beta
hess_norm1 = beta / m        # ||W||_1 + beta/m on the invariant region
deg_w = 1 * omega

# Relative entropy to the uniform Gibbs measure.
delta_F = sum(r * log(r) for r in rho0) - log(mpf(1) / 2)

C2 = 2 * m * lam_sec * lam_min_hess
C1 = C2 / delta_F
C3 = 2 * sqrt(2) * deg_w * hess_norm1 / sqrt(lam_min_hess) * (1 - m) / m * lam_max / lam_sec
r = sqrt(2) * deg_w * hess_norm1 / lam_min_hess ** mpf(1.5) * (1 - m) / m**2 * lam_max / lam_sec**2 * sqrt(delta_F)
C = C2 / (r + 1) ** 2
sqrt_x = (-C3 + sqrt(C3**2 + 4 * C1 * C2)) / (2 * C1)
maxmin = C1 * sqrt_x**2

for name, value in [("m", m), ("delta_F", delta_F), ("C1", C1), ("C2", C2), ("C3", C3),
                    ("r", r), ("C", C), ("maxmin", maxmin)]:
    print(f"{name:8s} {mp.nstr(value, 17)}")

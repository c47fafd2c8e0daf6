"""Regenerate the frozen reference numbers used by the test-suite.

Independent of the package: high-precision scalar evaluation with mpmath and
a tight-tolerance scipy DOP853 reference run. Run with ``python3 <this file>``.
"""
import mpmath as mp
import numpy as np
from scipy.integrate import solve_ivp

mp.mp.dps = 40

C, G_L, G_CA, G_K = 20, 2, 4, 8
V_L, V_CA, V_K, I_EXT = -50, 100, -70, 50
VT1, VT2, VT3, VT4, LAM = -1, 15, 10, mp.mpf("14.5"), mp.mpf("0.1")


def f(v, n):
    m = (1 + mp.tanh((v - VT1) / VT2)) / 2
    return (-G_L * (v - V_L) - G_CA * m * (v - V_CA) - G_K * n * (v - V_K) + I_EXT) / C


def g(v, n):
    ninf = (1 + mp.tanh((v - VT3) / VT4)) / 2
    tau = 1 / mp.cosh((v - VT3) / (2 * VT4))
    return LAM * (ninf - n) / tau


def gates():
    print("half(1+tanh(1)) =", mp.nstr((1 + mp.tanh(1)) / 2, 20))
    print("1/cosh(1)       =", mp.nstr(1 / mp.cosh(1), 20))


def field_values():
    v, n = mp.mpf(-35), mp.mpf("0.9")
    print("set10 field:", mp.nstr(f(v, n), 20), mp.nstr(g(v, n), 20))
    v1, n1, v2, n2, s = mp.mpf(-35), mp.mpf("0.9"), mp.mpf(10), mp.mpf(3), mp.mpf(-1)
    gamma = mp.mpf("0.5")
    out = [f(v1, n1) + s * (v2 - v1), g(v1, n1), f(v2, n2) + s * (v1 - v2), g(v2, n2),
           2 * gamma * (v1 - v2) ** 2]
    print("set11 field:", [mp.nstr(x, 20) for x in out])


def period():
    def rhs(t, y):
        v, n = y
        m = 0.5 * (1 + np.tanh((v - VT1) / VT2))
        ninf = 0.5 * (1 + np.tanh((v - VT3) / float(VT4)))
        tau = 1 / np.cosh((v - VT3) / (2 * float(VT4)))
        return [(-G_L * (v - V_L) - G_CA * m * (v - V_CA) - G_K * n * (v - V_K) + I_EXT) / C,
                float(LAM) * (ninf - n) / tau]

    t = np.arange(0, 200 + 5e-4, 1e-3)
    sol = solve_ivp(rhs, (0, 200), [-35, 0.9], t_eval=t, method="DOP853", rtol=1e-12, atol=1e-12)
    v = sol.y[0]
    idx = [i for i in range(1, len(v) - 1) if v[i] > v[i - 1] and v[i] >= v[i + 1]]
    peaks = []
    for i in idx:  # parabolic refinement
        a, b, c = v[i - 1], v[i], v[i + 1]
        peaks.append(t[i] + 0.5 * 1e-3 * (a - c) / (a - 2 * b + c))
    print("peak times:", peaks)
    print("mean period:", np.mean(np.diff(peaks)))


if __name__ == "__main__":
    gates()
    field_values()
    period()

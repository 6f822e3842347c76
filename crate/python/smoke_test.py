#!/usr/bin/env python3
"""Smoke test for the qmeter extension module.

Build and stage the module first:

    cargo build -p qmeter-py --release
    cp target/release/libqmeter.so python/qmeter.so

then run `python3 python/smoke_test.py`.
"""

import math
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent))

import qmeter


def approx(a, b, tol):
    assert abs(a - b) <= tol, f"{a} vs {b} (tol {tol})"


def main():
    # spin algebra
    singlet = qmeter.make_singlet()
    assert len(singlet) == 4
    approx(singlet[1][1].real, 0.5, 1e-12)
    corr = qmeter.spin_correlation_matrix(singlet)
    for i in range(3):
        for j in range(3):
            approx(corr[i][j], -1.0 if i == j else 0.0, 1e-12)

    up = qmeter.make_pure_spin(0.0, 0.0)
    approx(up[0][0].real, 1.0, 1e-12)

    # readout formula and time scale
    approx(qmeter.p_plus_erf(0.0, 0.125), 0.5, 1e-12)
    app = qmeter.Apparatus(gamma=1.0, epsilon=0.5 * math.e ** -2)
    approx(qmeter.measurement_time(app, 0.0), 1.0 + 0.5 * math.log(2.0), 1e-9)

    # measurement ensemble splits evenly when the spin is decoupled
    app = qmeter.Apparatus(gamma=1.0, epsilon=0.05)
    stats = qmeter.measure_ensemble(app, polar=math.pi / 2, n=400, seed=1, t_end=10.0)
    assert stats["n_plus"] + stats["n_minus"] + stats["n_undecided"] == 400
    approx(stats["p_plus"], 0.5, 0.1)

    # determinism
    again = qmeter.measure_ensemble(app, polar=math.pi / 2, n=400, seed=1, t_end=10.0)
    assert stats == again

    # EPR anti-correlation and the oracle
    tight = qmeter.Apparatus(gamma=1.0, epsilon=0.01)
    est = qmeter.estimate_correlation(tight, 0.0, 0.0, n=400, seed=2)
    assert est["c"] < -0.9, est
    erf_app = qmeter.Apparatus(gamma=4.0, epsilon=1.0)
    approx(qmeter.correlation_oracle(erf_app, 0.0, 0.0), -0.464559054, 1e-6)

    # CHSH reports an honest value below 2 for this model
    res = qmeter.chsh(erf_app, n=300, seed=3)
    assert res["oracle_statistic"] < 2.0
    assert abs(res["statistic"] - res["oracle_statistic"]) < 5 * res["stderr"] + 0.05

    # cosmology
    g_ret, g_stat = qmeter.evaluate_kernels(-1.0, -2.0)
    approx(g_ret, -7.0 / 6.0, 1e-12)
    approx(g_stat, -1.5, 1e-12)
    v = qmeter.analytic_mode(1.0, -1.0, 1.0)
    approx(abs(v), math.sqrt(2.0), 1e-12)
    approx(qmeter.standard_spectrum(2.0 * math.pi), 1.0, 1e-12)
    spec = qmeter.power_spectrum([0.1, 1.0], n=50, seed=4)
    assert len(spec["power"]) == 2 and all(p > 0 for p in spec["power"])

    # constants
    a = qmeter.astro_estimates()
    approx(a["planet_mass"] / 8.1e26, 1.0, 0.05)
    approx(a["fusion_temperature"] / 5e8, 1.0, 0.2)

    print("smoke test: all checks passed")


if __name__ == "__main__":
    main()

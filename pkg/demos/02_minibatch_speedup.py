"""
Mini-batch speedup: theory against measurement
==============================================

With tau-nice sampling the predicted speedup depends on how much
examples overlap in features. Without overlap it is exactly tau;
with full overlap it saturates.
"""
import numpy as np

from quartz import ProblemInstance, SerialSampling, SmoothedHinge, SolverConfig, TauNiceSampling, solve
from quartz.analysis import practical_speedup, tau_nice_speedup_from_data
from quartz.io import synth_instance

n, lam, gamma, eps = 1024, 1 / 32, 1.0, 1e-6

for profile, density in [("fully_sparse", 1 / n), ("uniform", 0.05)]:
    m = synth_instance(n, n, density, profile, seed=1, normalize=True)
    prob = ProblemInstance(m, SmoothedHinge(gamma), lam)

    def traces(scheme):
        return [solve(prob, SolverConfig(scheme, epsilon=eps, seed=s)).trace for s in range(3)]

    serial = traces(SerialSampling.uniform(n))
    print(f"\n{profile} (density {density:.4f})")
    print(" tau  theory  measured")
    for tau in (2, 8, 32):
        theo = tau_nice_speedup_from_data(m, tau, lam, gamma)
        prac = practical_speedup(serial, traces(TauNiceSampling(n, tau)), eps)
        print(f"{tau:4d}  {theo:6.2f}  {prac:8.2f}")

"""
Linear-quadratic feedback around the equilibrium
================================================

Solve the algebraic Riccati equation by Newton-Kleinman iteration and
look at how the gain depends on the control penalty.
"""
import numpy as np

from opioid_residence import REPORTED_GAIN, ActuationMatrix, EpidemicParams, linearize, solve_care

np.set_printoptions(precision=4, suppress=True)
A = linearize(EpidemicParams()).A
bt = ActuationMatrix(b1=0.01, b2=0.001)

sol = solve_care(A, bt, gamma_tilde=1e-3)
print("P =\n", sol.P)
print("K =\n", sol.K)
print("residual %.2e after %d iterations" % (sol.residual, sol.iterations))
print("closed-loop eigenvalues:", np.sort(sol.closed_loop_eigenvalues().real))

# the reported gain is about ten times smaller than the solved one
print("reported K =\n", REPORTED_GAIN)
print("elementwise ratio solved / reported:\n", sol.K / REPORTED_GAIN)

# cheaper control -> stronger feedback
for g in (1e-5, 1e-4, 1e-3, 1e-2, 1e-1):
    K = solve_care(A, bt, g).K
    print(f"gamma_tilde={g:7.0e}  ||K||={np.linalg.norm(K):9.3f}")

"""
Addiction-free equilibrium and its linearization
================================================

Where the deterministic system settles when nobody is addicted, and how
fast small perturbations die out there.
"""
import numpy as np

from opioid_residence import EpidemicParams, addiction_free_equilibrium, linearize, reproduction_number

p = EpidemicParams()
print(p.as_dict())

# the equilibrium has x2 = x3 = 0; z follows from x1 + x2 + x3 + z = 1
eq = addiction_free_equilibrium(p)
print("equilibrium:", eq)

lm = linearize(p)
np.set_printoptions(precision=5, suppress=True)
print("Jacobian at the equilibrium:\n", lm.A)
print("eigenvalues:", np.sort(lm.eigenvalues().real))

# the slowest mode sets the deterministic relaxation time
print("slowest relaxation time: %.1f" % (-1 / lm.eigenvalues().real.max()))

# R0 < 1 here, so the equilibrium is locally stable
print("R0 = %.5f" % reproduction_number(p))

# push the infection rate until R0 crosses 1
for beta in (0.0036, 0.02, 0.04, 0.06, 0.1):
    q = p.replace(beta=beta)
    r0 = reproduction_number(q)
    top = linearize(q).eigenvalues().real.max()
    print(f"beta={beta:6.4f}  R0={r0:6.3f}  max Re(eig)={top:+.4f}")

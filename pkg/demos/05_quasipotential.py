"""
The quadratic quasipotential on polyhedral domains
==================================================

phi is the cheapest boundary point of a quadratic form, scaled by the
form's norm. The answer depends on where the box sits.
"""
import numpy as np

from opioid_residence import ActuationMatrix, Domain, EpidemicParams, linearize, quasipotential, solve_care

P = solve_care(linearize(EpidemicParams()).A, ActuationMatrix(0.01, 0.001), 1e-3).P

# cubes of growing size around the origin of deviation coordinates
for r in (0.05, 0.1, 0.25, 0.5, 1.0):
    res = quasipotential(P, Domain.box([-r] * 3, [r] * 3))
    print(f"half width {r:4.2f}: phi = {res.phi:.6f} on facet {res.facet}")

# phi scales with the square of the domain size
base = quasipotential(P, Domain.box([-0.1] * 3, [0.1] * 3)).phi
print("phi(2D) / phi(D) =", quasipotential(P, Domain.box([-0.2] * 3, [0.2] * 3)).phi / base)

# boxes that keep the population fractions physical
eq = np.array([0.95249087, 0.0, 0.0])
for lo, hi in (([-0.9, -0.01, -0.01], [0.04, 0.2, 0.2]), ([-0.5, -0.05, -0.05], [0.047, 0.5, 0.5])):
    res = quasipotential(P, Domain.box(lo, hi))
    print(f"box {lo} .. {hi}: phi = {res.phi:.3e}, minimizer {np.round(res.minimizer, 4)}")

# the spectral-norm convention matters: the Frobenius norm gives a smaller phi
d = Domain.box([-0.25] * 3, [0.25] * 3)
print("spectral %.4e  frobenius %.4e" % (quasipotential(P, d).phi, quasipotential(P, d, norm_kind="frobenius").phi))

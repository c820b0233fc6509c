"""
Exit rate as a principal eigenvalue
===================================

The long-time exit rate from a box equals the principal Dirichlet
eigenvalue of the generator. Compare an upwind discretization with a
Monte Carlo survival fit for the closed-loop linear system.
"""
import time

import numpy as np

from opioid_residence import (
    REPORTED_GAIN,
    ActuationMatrix,
    EpidemicParams,
    GridSpec,
    LinearDynamics,
    discretize_generator,
    eigen_vs_montecarlo,
    linearize,
    principal_eigenvalue,
)
from opioid_residence.eigen import EigenCase

# 1-D warm-up: dx = -x dt + sqrt(0.5) dW on (-1, 1)
ou = LinearDynamics([[-1.0]])
for n in (101, 401, 1601):
    lam = principal_eigenvalue(discretize_generator(ou, 0.5, GridSpec((-1.0,), (1.0,), (n,)))).lam
    print(f"n={n:5d}  lambda={lam:.5f}")

# 3-D closed loop, noise on x1 only
M = linearize(EpidemicParams()).A + ActuationMatrix(0.01, 0.001).matrix @ REPORTED_GAIN
g = GridSpec.around(np.zeros(3), 0.25, 25)
t = time.perf_counter()
rep = eigen_vs_montecarlo(EigenCase(LinearDynamics(M), 0.1, g, n_paths=5000, dt=5e-4))
print(f"FD {rep.lambda_fd:.4f}  MC {rep.lambda_mc:.4f}  gap {rep.gap:.1%}  ({time.perf_counter() - t:.1f}s)")
print("eigenfunction min/max:", rep.fd.psi.min(), rep.fd.psi.max())

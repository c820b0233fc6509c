"""
Residence time versus noise intensity
=====================================

eps * ln E[tau] approaches the quasipotential barrier as eps shrinks.
For dx = -x dt + sqrt(eps) dW on (-1, 1) the barrier is a r^2 = 1.
"""
from opioid_residence import Domain, LinearDynamics, log_residence_scaling

ou = LinearDynamics([[-1.0]])
d = Domain.box([-1.0], [1.0])
tab = log_residence_scaling(1.0, ou, d, [0.5, 0.35, 0.25, 0.18], n_paths=2000, dt=0.01, t_max=5e3)
for r in tab.rows:
    print(f"eps={r.epsilon:5.3f}  E[tau]={r.mean_tau:9.2f}  eps*ln E[tau]={r.eps_log_tau:.4f}")
# convergence is slow: the prefactor contributes eps * ln(const) at each level

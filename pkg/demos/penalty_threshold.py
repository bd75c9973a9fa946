"""The penalty threshold as a function of the dual step-size.

Prints ``beta_bar(tau)`` for the identity map and for a frame blur; the
threshold is smallest near ``tau = 1`` and blows up at both ends of the
admissible interval ``(0, (1 + sqrt 5) / 2)``.
"""

import numpy as np

import ncxadmm as nx

blur = nx.frame_blur(16, 16, 1.0)
lmin, lmax = nx.gram_eigen_bounds(blur)
print(f"blur: lambda_min={lmin:.3e} lambda_max={lmax:.3f}")

print(f"{'tau':>6s} {'theta':>10s} {'identity':>10s} {'blur':>10s}")
for tau in np.r_[0.1, 0.3, 0.5, 0.8, 1.0, 1.2, 1.4, 1.6, 1.61]:
    print(f"{tau:6.2f} {nx.theta(tau):10.4f} {nx.beta_bar(tau, 1, 1):10.4f} "
          f"{nx.beta_bar(tau, lmin, lmax):10.4f}")

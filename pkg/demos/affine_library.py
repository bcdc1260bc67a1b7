# %% [markdown]
# # Affine systems: two ways to use the same data
#
# An affine system x+ = Ax + Bu + e, y = Cx + Du + r is linear in the lifted
# state (x, 1). A library can handle the constant either by requiring the
# coefficients to sum to one (DD-A, window length n) or by treating it as one
# more state (DD-K, window length n + 1).

# %%
import numpy as np

from ddkoop import library_from_single
from ddkoop.representation import PredictionProblem, dda_predict, ddk_predict
from ddkoop.systems import random_affine, simulate_affine

rng = np.random.default_rng(3)
aff = random_affine(rng, n=3, m=1, p=1)
data = simulate_affine(aff, rng.standard_normal(3), rng.standard_normal((150, 1)))
N = 10
test = simulate_affine(aff, rng.standard_normal(3), rng.standard_normal((4 + N, 1)))
truth = test.y[4:].ravel()

# %%
for name, fn, T_ini in (("DD-A", dda_predict, 3), ("DD-K", ddk_predict, 4),
                        ("DD-K", ddk_predict, 3)):
    lib = library_from_single(data, T_ini + N, T_ini, N)
    res = fn(lib, PredictionProblem.from_trajectory(test.window(4 - T_ini, T_ini), test.u[4:]))
    print(f"{name}, T_ini = {T_ini}: {res.verdict:11s} max error {np.abs(res.y_F - truth).max():.2e}")

# %% [markdown]
# The three-sample window is consistent with the DD-K library but does not fix
# the constant state, so the prediction is a valid trajectory with the wrong
# offset.

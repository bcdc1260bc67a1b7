# %% [markdown]
# # How large must a linear embedding be? Reading it off the Hankel rank
#
# For data generated by a system with an order-n_z linear embedding, the
# depth-L Hankel matrix of one trajectory has rank at most mL + n_z. Turned
# around, a rank above mL + n_z rules out every embedding of order n_z or less.

# %%
import numpy as np

from ddkoop import benchmark_system, library_from_single
from ddkoop.experiments import collect_trajectory, rank_diagnostics
from ddkoop.representation import embedding_nonexistence_certificate
from ddkoop.systems import lti_as_nonlinear, random_lti

system, _, _ = benchmark_system()
traj = collect_trajectory(system, np.random.default_rng(7), 400)

# %%
report = rank_diagnostics(traj, L_values=[1, 2, 4, 8, 16, 24], nz_bars=[2, 3, 4, 5], cert_L=24)
for row in report["rank_growth"]:
    print(f"L = {row['L']:2d}: rank {row['rank']:2d} = mL + {row['excess']}")
for v in report["nonexistence"]:
    print(f"order <= {v['nz_bar']}: {v['verdict']} (rank {v['rank']} vs bound {v['bound']})")

# %% [markdown]
# The excess settles at 5, the order of the known embedding. A linear system
# of order 2 never gets certified at its own order.

# %%
lti = lti_as_nonlinear(random_lti(np.random.default_rng(1), 2, 1, 1))
lib = library_from_single(collect_trajectory(lti, np.random.default_rng(2), 200), 10, 10, 0)
print("LTI n = 2, order <= 2:", embedding_nonexistence_certificate(lib, 2).verdict)
print("LTI n = 2, order <= 1:", embedding_nonexistence_certificate(lib, 1).verdict)

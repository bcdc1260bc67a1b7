# %% [markdown]
# # Exact prediction from input/output data, and what happens when the window is too short
#
# The benchmark system has two states, but it admits a five-dimensional linear
# embedding whose observability index is 4. A library built from one
# 52-sample experiment therefore predicts exactly once the initial window
# covers four samples, and drifts with shorter windows.

# %%
import numpy as np

from ddkoop import benchmark_system, library_from_single
from ddkoop.systems import observability_index
from ddkoop.experiments import collect_excited, rep_rng, sinusoid_inputs
from ddkoop.representation import PredictionProblem, ddk_predict, dda_predict
from ddkoop.systems import simulate_nonlinear

system, embedding, dictionary = benchmark_system()
print("observability index of the embedding:", observability_index(embedding))

# %% [markdown]
# One random experiment: uniform inputs in [-5, 5], initial state in [-1, 1]^2.
# The collector redraws until the lifted excitation matrix is well posed.

# %%
rng = rep_rng(0)
col = collect_excited(system, rng, 52, 24, dictionary)
data = col.traj
print(f"collected {data.T} samples after {col.draws} draw(s), cond(H_K) = {col.lifted_cond:.2e}")

# %% [markdown]
# A test experiment from a fresh state: a random past window followed by the
# sinusoid u_k = 5 sin(pi k / 4) over a 20-step horizon.

# %%
N = 20
u_F = sinusoid_inputs(N)
x_test = rng.uniform(-1, 1, 2)
u_past = rng.uniform(-5, 5, (4, 1))
test = simulate_nonlinear(system, x_test, np.vstack([u_past, u_F]))
truth = test.y[4:]

# %%
for T_ini in (2, 3, 4):
    lib = library_from_single(data, T_ini + N, T_ini, N)
    prob = PredictionProblem.from_trajectory(test.window(4 - T_ini, T_ini), u_F)
    y_F = ddk_predict(lib, prob).y_F.reshape(N, 2)
    print(f"DD-K, T_ini = {T_ini}: l = {lib.l:2d}, max error {np.abs(y_F - truth).max():.2e}")

lib = library_from_single(data, 2 + N, 2, N)
prob = PredictionProblem.from_trajectory(test.window(2, 2), u_F)
y_F = dda_predict(lib, prob).y_F.reshape(N, 2)
print(f"DD-A, T_ini = 2: max error {np.abs(y_F - truth).max():.2e}")

# %% [markdown]
# Only the four-sample window pins down the lifted initial state, so only that
# library reproduces the true output sequence to rounding error.

"""A pointer that measures energy, and what a superposition does to it.

The system couples to a pointer coordinate through H_x p_y, so each energy
eigenstate translates the pointer rigidly by coupling * energy * duration.
Preparing an eigenstate moves the pointer to the matching position;
preparing a superposition leaves the joint state with one pointer lobe per
branch — the apparatus inherits the superposition instead of resolving it,
and the y-marginal shows the |c_k|^2-weighted lobes.
"""

import numpy as np

from qfluid import GridSpec
from qfluid.oracle import Potential, gaussian_packet, stationary_states
from qfluid.measurement import (
    lobe_masses,
    marginal_mean,
    pointer_marginal,
    pointer_measurement_brute,
    pointer_measurement_evolve,
)

grid_x = GridSpec.centered(24.0, 256)
grid_y = GridSpec.centered(16.0, 256)
potential = Potential.harmonic(grid_x, 1.0)
pairs = stationary_states(potential, 4)
pointer = gaussian_packet(grid_y, 0.5, center=-4.0)
coupling = 1.0

print("single eigenstates: pointer lands at coupling * energy * duration")
duration = 2.0
for k in range(3):
    coeffs = [0.0] * 4
    coeffs[k] = 1.0
    joint = pointer_measurement_evolve(coeffs, pairs, pointer, coupling, duration)
    mean = marginal_mean(pointer_marginal(joint))
    expected = -4.0 + coupling * pairs[k][0] * duration
    print(f"  k={k}: <y> = {mean:+.4f}   expected {expected:+.4f}")

print("\nequal superposition of the two lowest states:")
duration = 4.0
coeffs = [1 / np.sqrt(2), 1 / np.sqrt(2), 0.0, 0.0]
joint = pointer_measurement_evolve(coeffs, pairs, pointer, coupling, duration)
marginal = pointer_marginal(joint)
split = -4.0 + coupling * duration * (pairs[0][0] + pairs[1][0]) / 2
below, above = lobe_masses(marginal, split)
print(f"  lobe masses: {below:.6f} / {above:.6f}   (the apparatus is now"
      " in a superposition too)")

print("\nbrute-force 2D propagation of the same coupling, as a cross-check:")
grid_xb = GridSpec.centered(24.0, 128)
grid_yb = GridSpec.centered(16.0, 128)
pot_b = Potential.harmonic(grid_xb, 1.0)
pairs_b = stationary_states(pot_b, 2)
pointer_b = gaussian_packet(grid_yb, 0.5, center=-4.0)
brute = pointer_measurement_brute(
    [1 / np.sqrt(2), 1 / np.sqrt(2)], pairs_b, pointer_b, pot_b,
    coupling, duration, dt=2e-3,
)
below_b, above_b = lobe_masses(
    pointer_marginal(brute),
    -4.0 + coupling * duration * (pairs_b[0][0] + pairs_b[1][0]) / 2,
)
print(f"  lobe masses: {below_b:.6f} / {above_b:.6f}")

"""
Driving and repulsive forces
============================

A pedestrian is pulled toward its goal and pushed away from its neighbors.
This walk-through evaluates both forces by hand for a few small setups.
"""

# %%
# A single agent at rest, goal ten meters ahead. The driving force relaxes
# its velocity toward ``v0 * e`` over ``tau`` seconds.
import numpy as np

from goalforce import AgentState, ForceParams, total_forces
from goalforce.forces import repulsive_force_pair, semi_minor_axis

params = ForceParams()
alone = {1: AgentState(1, (0.0, 0.0), (0.0, 0.0))}
out = total_forces(alone, {1: np.array([10.0, 0.0])}, None, params)
print("driving from rest:", out[1].driving)  # (1.34 / 0.5, 0) = (2.68, 0)

# %%
# The repulsion comes from an elliptical potential. Its semi-minor axis
# ``b`` shrinks in front of a moving neighbor, so the push is stronger
# when you stand where the other person is about to step.
r = np.array([2.0, 0.0])
print("b, neighbor still  :", semi_minor_axis(r, 0.0, (1.0, 0.0), params.dt))
print("b, neighbor walking:", semi_minor_axis(r, 2.5, (1.0, 0.0), params.dt))

a = AgentState(1, (2.0, 0.0), (0.0, 0.0))
for vel in [(0.0, 0.0), (1.5, 0.0), (-1.5, 0.0)]:
    b = AgentState(2, (0.0, 0.0), vel)
    print(f"neighbor velocity {vel}: force on a = {repulsive_force_pair(a, b, params)}")

# %%
# Three walkers in a corridor. Each one sums the pushes from the other two;
# a push that comes from outside the field of view counts half.
states = {
    1: AgentState(1, (0.0, 0.0), (1.2, 0.0)),
    2: AgentState(2, (1.0, 0.2), (1.2, 0.0)),
    3: AgentState(3, (-0.8, -0.1), (1.2, 0.0)),
}
goals = {a: s.position + [10.0, 0.0] for a, s in states.items()}
for agent, sample in total_forces(states, goals, None, params).items():
    print(agent, "driving", np.round(sample.driving, 3), "repulsive", np.round(sample.repulsive, 3))

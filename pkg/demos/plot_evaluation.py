"""
Scoring predictions
===================

Best-of-K displacement errors and a collision count, for the force model
against a constant-velocity baseline on turning pedestrians.
"""

# %%
# Every agent turns a corner after the observation ends. Extrapolating the
# last velocity overshoots; the goal-conditioned force model follows the
# turn.
from goalforce import ConstantVelocityPredictor, SocialForcePredictor, evaluate
from goalforce.metrics import summary_table
from goalforce.synthetic import suite

scenes = suite("turning", n_variants=20, seed=0)
reports = [evaluate(scenes, p, K=20, subset="turning") for p in (SocialForcePredictor(), ConstantVelocityPredictor())]
for r in reports:
    print(f"{r.predictor:<18} ADE {r.ade_k:.3f}  FDE {r.fde_k:.3f}  NC {r.nc}")

# %%
# On the head-on suite the ground truth is two straight lines that pass
# 5 cm apart. The baseline reproduces them exactly and collides; the force
# model gives up some accuracy to keep its distance.
head_on = suite("headon", n_variants=20, seed=0)
reports += [evaluate(head_on, p, subset="headon") for p in (SocialForcePredictor(joint=True), ConstantVelocityPredictor())]
for r in reports[2:]:
    print(f"{r.predictor:<18} head-on NC {r.nc}")

# %%
# The combined ADE/FDE table, one row per method.
header, rows = summary_table(reports)
for row in [header] + rows:
    print("  ".join(f"{c:<18}" for c in row))

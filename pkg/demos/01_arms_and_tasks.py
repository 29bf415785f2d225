#!/usr/bin/env python3
"""Tour of the simulated arms and tasks.

Builds the three shipped morphologies, rolls out random and scripted
controllers, and exports one episode as CSV.
"""
import numpy as np

from morphtransfer import dynamics, trajopt

# the three agents used by the shipped experiments
three = dynamics.three_link()
four = dynamics.four_link()
tendon = dynamics.tendon_three_link()
for m in (three, four, tendon):
    print(f"{m.actuation:7s} arm: {m.n_links} links, agent state dim {m.agent_dim}, "
          f"action dim {m.action_dim}, reach {m.reach:.2f} m")

# forward kinematics of a folded pose
pose = np.array([0.6, -0.4, 0.9])
pts = dynamics.forward_kinematics(pose, three.link_lengths)
print("\njoint positions for pose", pose, "->")
print(np.round(pts, 3))

# the tendon arm is observed through tendon lengths, not joint angles
lengths, vels = dynamics.tendon_observe(pose, np.array([1.0, 0.0, -0.5]),
                                        tendon.tendon_spec)
print("\ntendon lengths at that pose:", np.round(lengths, 3))
print("tendon length velocities:  ", np.round(vels, 3))

# a shaped button-pressing episode under exploration noise
spec = dynamics.make_domain(three, "button_press", "shaped")
policy = trajopt.init_policy(spec.state_dim, spec.action_dim, spec.horizon, 0.1)
traj = dynamics.rollout(policy, spec, condition_index=0, seed=7)
print(f"\nrandom-policy episode: total cost {traj.total_cost():.2f}, "
      f"success {traj.success}")
print(f"button starts at {traj.states[0].env[:2]}, "
      f"ends at {np.round(traj.states[-1].env[:2], 3)}")

dynamics.trajectory_to_csv(traj, spec, "episode_button.csv")
print("episode written to episode_button.csv")

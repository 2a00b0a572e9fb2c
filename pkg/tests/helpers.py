"""Scripted policies shared by the tests."""

import numpy as np


class RandomPolicy:
    """Uniform over action indices, same interface as a learner."""

    def __init__(self, n_actions):
        self.n_actions = n_actions

    def act(self, obs, rng, greedy=False):
        a = 0 if greedy else int(rng.integers(self.n_actions))
        return a, -float(np.log(self.n_actions)), 0.0


class ConstantPolicy:
    def __init__(self, action, value=0.0):
        self.action = action
        self.value = value

    def act(self, obs, rng, greedy=False):
        return self.action, 0.0, self.value

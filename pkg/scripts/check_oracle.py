"""Closed-form channel versus the continuous-time oracle over a few grid shapes."""

from otfs_cs.cli import cmd_validate

for D, V in [(2, 3), (4, 4), (5, 3), (8, 8), (6, 10)]:
    cmd_validate(D, V, 3, 5, seed=11, tolerance=1e-9)
    cmd_validate(D, V, 3, 5, seed=11, tolerance=1e-10, integer=True)

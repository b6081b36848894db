"""biteplan: simulation-scale planning for robot-assisted bite transfer.

The package covers the full loop: parametric food meshes on a fork
proxy, mouth-frame collision and comfort/efficiency costs, goal
sampling with medoid clustering, a quality-weighted bidirectional
sampling planner, a multi-bite driver, and wrench-sensor calibration
with a deadband admittance controller.
"""

__version__ = "0.1.0"

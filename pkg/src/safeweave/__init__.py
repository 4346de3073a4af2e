"""Safety-filtered control stack for two-vehicle traffic weaving.

An offline differential-game reachability solver produces a cached value
function over the robot/human relative state; an online tracking MPC injects
a safety-preserving control half-space derived from that cache; a closed-loop
simulator evaluates tracking-only, switching, and filtered controllers
against scripted and live adversaries.
"""

__version__ = "0.1.0"

"""arena-lab: deterministic headless arena environment for RL experiments.

A fixed-timestep rigid-body playground (40x40 walled arena, valenced goals,
zones, dispensers, sign boards), a YAML configuration DSL with procedural
template expansion, raycast/camera/vector observations, scripted baseline
agents, and a TCP/WebSocket protocol server for remote control.
"""

__version__ = "0.1.0"

PROTOCOL_VERSION = "arena-lab/1"

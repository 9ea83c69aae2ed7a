"""reconcell: a desk-scale, fully simulated reconfigurable robot workcell.

Subsystems:

- :mod:`reconcell.model` -- shared value types (poses, trajectories, events)
- :mod:`reconcell.registry` -- plug-and-produce module registry and event bus
- :mod:`reconcell.kinematics` -- arm kinematics kernels (compiled or NumPy)
- :mod:`reconcell.robot` -- robot abstraction layer + simulated arm
- :mod:`reconcell.periphery` -- rotary table, tool rack, fixture
- :mod:`reconcell.skills` -- versioned skill database
- :mod:`reconcell.teach` -- jog mapping and demonstration recording
- :mod:`reconcell.assembler` -- sequence DSL, FSM compiler and executor
- :mod:`reconcell.cell` -- composition root and scenario bring-up
- :mod:`reconcell.gateway` -- HTTP/WebSocket operations boundary
- :mod:`reconcell.cli` -- operator command line
"""

__version__ = "0.1.0"

"""Fair, energy-harvesting-aware data-collection scheduling for sensor networks."""

from .model import (EnergyConstants, FairnessConfig, FrameSchedule, NodeState,
                    ProtocolState, RunMetrics, packet_energy, payload_packets, rcap_cost)
from .sched import EHFS, FCFS, HighPRR, LowEnergy, SchedulerInput, get_scheduler
from .config import RunConfig
from .sim import RunRecord, run, sweep
from .exact import ExactInstance, ExactSolution, check_feasible, gap, solve_exact

__version__ = "0.1.0"

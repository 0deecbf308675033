"""
Execution Graph Definition
Plans a sweep as independent (L, trial) tasks and tracks the sweep through
INIT -> PLAN -> RUN -> AGGREGATE -> SUCCESS (or ERROR from any stage).
"""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, Any, List, Optional, Tuple

from src.utils.config_manager import ExperimentSpec


LAYER_INDEPENDENT_SCHEMES = ("zf-4ta", "zf-8ta")


class ExecutionState(Enum):
    """States in the execution graph"""
    INIT = "INIT"
    PLAN = "PLAN"
    RUN = "RUN"
    AGGREGATE = "AGGREGATE"
    SUCCESS = "SUCCESS"
    ERROR = "ERROR"


@dataclass(frozen=True)
class SweepTask:
    """
    One unit of work. `layers` is None for layer-independent baselines,
    whose results are replicated across every L of the sweep.
    """
    layers: Optional[int]
    trial: int
    schemes: Tuple[str, ...]


class ExecutionGraph:
    """
    Defines the sweep flow:

    INIT -> PLAN -> RUN -> AGGREGATE -> SUCCESS
              \\------\\--------\\------> ERROR

    Task order is positional (L-major, then trial), never completion order.
    """

    _TRANSITIONS = {
        ExecutionState.INIT: ExecutionState.PLAN,
        ExecutionState.PLAN: ExecutionState.RUN,
        ExecutionState.RUN: ExecutionState.AGGREGATE,
        ExecutionState.AGGREGATE: ExecutionState.SUCCESS,
    }

    def __init__(self, spec: ExperimentSpec):
        self.spec = spec
        self.current_state = ExecutionState.INIT
        self.history: List[Dict[str, Any]] = []

    def get_next_state(self, current_state: ExecutionState, succeeded: bool = True) -> ExecutionState:
        """
        Determine the next state.

        Args:
            current_state: Current execution state
            succeeded: False sends any stage to ERROR

        Returns:
            Next state in the graph
        """
        if not succeeded:
            return ExecutionState.ERROR
        return self._TRANSITIONS.get(current_state, ExecutionState.ERROR)

    def advance(self, succeeded: bool = True) -> ExecutionState:
        self.current_state = self.get_next_state(self.current_state, succeeded)
        return self.current_state

    def plan(self) -> List[SweepTask]:
        """
        Enumerate the sweep's tasks.

        sumrate: one task per (L, trial) carrying the SIM schemes, plus one task per
        trial for the layer-independent baselines. doa: one task per (L, trial).
        """
        spec = self.spec
        trials = range(spec.trials)
        if spec.experiment == "doa":
            return [SweepTask(layers, trial, ()) for layers in spec.layers for trial in trials]

        sim_schemes = tuple(s for s in spec.schemes if s not in LAYER_INDEPENDENT_SCHEMES)
        baselines = tuple(s for s in spec.schemes if s in LAYER_INDEPENDENT_SCHEMES)
        tasks = []
        if sim_schemes:
            tasks += [SweepTask(layers, trial, sim_schemes) for layers in spec.layers for trial in trials]
        if baselines:
            tasks += [SweepTask(None, trial, baselines) for trial in trials]
        return tasks

    def record_step(self, state: ExecutionState, result: Dict[str, Any]):
        """Record execution step in history"""
        self.history.append({
            'state': state.value,
            'result': result
        })

    def get_execution_summary(self) -> Dict[str, Any]:
        """Get summary of execution graph traversal"""
        return {
            'experiment': self.spec.experiment,
            'final_state': self.current_state.value,
            'steps': self.history
        }

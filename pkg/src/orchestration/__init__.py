"""
Orchestration Package - sweep planning and execution
- Execution graph and task plan
- Orchestrator running tasks on a worker pool
"""

from src.orchestration.execution_graph import ExecutionGraph, ExecutionState, SweepTask
from src.orchestration.orchestrator import Orchestrator, run_doa_sweep, run_sumrate_sweep

__all__ = ['ExecutionGraph', 'ExecutionState', 'SweepTask', 'Orchestrator', 'run_doa_sweep', 'run_sumrate_sweep']

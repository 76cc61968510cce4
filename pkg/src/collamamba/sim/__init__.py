from .scenario import ScenarioConfig, load_scenario, save_scenario
from .simulator import (
    CSV_HEADER,
    CSV_SCHEMA_VERSION,
    AgentMessage,
    CommLog,
    FrameRecord,
    Mode,
    ScenarioResult,
    comm_volume,
    decide_mode,
    inject_pose_noise,
    mode_fractions,
    run_scenario,
)

__all__ = [
    "AgentMessage", "CSV_HEADER", "CSV_SCHEMA_VERSION", "CommLog",
    "FrameRecord", "Mode", "ScenarioConfig", "ScenarioResult", "comm_volume",
    "decide_mode", "inject_pose_noise", "load_scenario", "mode_fractions",
    "run_scenario", "save_scenario",
]

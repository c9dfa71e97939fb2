"""Scene configuration, stimulus runner and command line interface."""

from .audio import read_audio, write_audio
from .config import STIMULUS_KINDS, STIMULUS_SUFFIX, ConfigError, ScenarioConfig, load_config, parse_config
from .runner import (
    StimulusResult,
    output_paths,
    run_all_stimuli,
    run_stimulus,
    scene_layout,
    scripted_drop_time,
    stimulus_session,
)
from .scene import (
    FixedTrajectory,
    SweepTrajectory,
    build_scene,
    listener_to_sphere,
    make_trajectory,
    scene_coefficients,
)
from .trace import read_trace, write_trace

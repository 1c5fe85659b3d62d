"""Closed-loop two-model task planning with household and tabletop simulators."""

from .grammar import PASS, ActionCatalog, ActionStep, ObjectRef, ParseError, PassToken, parse_script, parse_step, render_step
from .household import HouseholdEnv, load_scene
from .orchestrator import LoopConfig, TaskSpec, run_episode
from .tabletop import TabletopEnv, load_tabletop

__version__ = "0.1.0"

__all__ = [
    "PASS",
    "ActionCatalog",
    "ActionStep",
    "HouseholdEnv",
    "LoopConfig",
    "ObjectRef",
    "ParseError",
    "PassToken",
    "TabletopEnv",
    "TaskSpec",
    "load_scene",
    "load_tabletop",
    "parse_script",
    "parse_step",
    "render_step",
    "run_episode",
]

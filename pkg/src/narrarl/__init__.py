"""Q-learning gridworld agents whose action suggestions pass through a narrative arbiter."""
from .arbiter import ArbiterRequest, LlmArbiter, Verdict, llm_decide, parse_action, passthrough, scripted
from .env import Action, GridWorld, Observation, Position, Transition, generate_grid, observe, shortest_path_len, step
from .experiment import ExperimentConfig, load_config, run_episode, run_experiment, sweep
from .llm_client import ChatClient, ChatConfig, StubClient, stub_client
from .metrics import EpisodeRecord, Report, compute_metrics
from .narratives import NarrativeFramework, builtin, load_framework, render
from .render import render_frame
from .rl import QTable, RlParams, Suggestion, init_qtable, suggest, td_update, train
from .trace import DecisionRecord, TraceSink, read_log, report_from_log

__version__ = "0.1.0"

"""Grouped multi-agent actor-critic activation policy."""
from .agents import (ENCODINGS, PRESET_GROUPS, THRESHOLD, AgentEnsemble, AgentGroup,
                     GroupingError, act, default_groups, encode_group_action, encoding_size)
from .checkpoint import CHECKPOINT_VERSION, CheckpointError, load_checkpoint, save_checkpoint
from .env import decisions_to_mask, encode_state, episode_batches, state_length, step_env
from .nn import Adam, MlpNet, ShapeError, forward, gradients, soft_update
from .replay import ReplayBuffer
from .train import (DivergenceError, Learner, PolicyResult, StepRecord, TrainConfig,
                    evaluate_policy, policy_deployment, train)

__all__ = [
    "ENCODINGS", "PRESET_GROUPS", "THRESHOLD", "AgentEnsemble", "AgentGroup", "GroupingError",
    "act", "default_groups", "encode_group_action", "encoding_size", "CHECKPOINT_VERSION",
    "CheckpointError", "load_checkpoint", "save_checkpoint", "decisions_to_mask",
    "encode_state", "episode_batches", "state_length", "step_env", "Adam", "MlpNet",
    "ShapeError", "forward", "gradients", "soft_update", "ReplayBuffer", "DivergenceError",
    "Learner", "PolicyResult", "StepRecord", "TrainConfig", "evaluate_policy",
    "policy_deployment", "train",
]

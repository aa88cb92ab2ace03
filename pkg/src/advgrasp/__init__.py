"""Adversarial self-supervised grasp learning in a deterministic 2D simulator."""

from .grasp_sim import (AdversaryAction, EpisodeRecord, GraspAction,
                        GraspOutcome, SimConfig, apply_shake, apply_snatch,
                        grasp_contacts, grasp_margin, run_episode)
from .neural import (NetworkParams, OptState, TrainingSample, backward,
                     bce_loss, forward, grad_check, init_network, load_network,
                     rmsprop_step, save_network)
from .policy import (GREEDY, UNIFORM, ProbMatrix, SelectionMode, importance,
                     probability_matrix, sample_candidates, select_adversary,
                     select_grasp)
from .scene import (Image, ObjectShape, Patch, Scene, extract_rotated_patch,
                    render_scene)
from .shapes import generate_object, generate_object_set
from .trainer import (Environment, GameConfig, ZeroSuccessfulGraspsError,
                      collect_random_grasps, collect_with_adversary,
                      joint_train, make_adversary_targets,
                      make_protagonist_targets, train_network)

__version__ = "0.1.0"


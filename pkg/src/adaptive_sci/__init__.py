"""Adaptive compression-ratio control for snapshot compressive video imaging.

A synthetic-video testbed: scenes are rendered with ground-truth boxes,
compressed with binary coded masks, reconstructed with GAP-TV, scored with a
blob detector, and a tabular Q-learning agent picks the number of frames B
folded into each measurement.
"""

from .detect import BoundingBox, Detection, DetectorConfig, average_precision, blob_detect, iou, match
from .reconstruct import ReconstructionConfig, gap_tv, psnr
from .rl_agent import Observation, QTable, TrainConfig, greedy_policy, train
from .rl_env import Action, RewardConfig, StateSpace, TransitionModel, reward, step
from .runner import EpisodeLog, RunConfig, compare, emit_csv, run_adaptive, run_fixed
from .sci_forward import MaskStack, Measurement, generate_masks, normalize, sense
from .video_io import FrameSequence, GroundTruthTrack, SceneSpec, generate_scene, load_frames, save_frames

__version__ = "0.1.0"

"""neuralik: hypernetwork-based neural inverse kinematics.

A hypernetwork conditioned on a target end-effector position emits the
weights of per-joint primary networks whose Gaussian-mixture outputs
are sampled sequentially, producing many valid joint-angle solutions.
Includes training, damped-least-squares and MLP baselines, and smooth
path following.
"""

from .kinematics import KinematicChain, Joint, load_chain, preset_chain, planar2_analytic_ik
from .model import IkModel, ModelConfig
from .gmm import GmmParams, Neighborhood

__all__ = [
    "KinematicChain", "Joint", "load_chain", "preset_chain", "planar2_analytic_ik",
    "IkModel", "ModelConfig", "GmmParams", "Neighborhood",
]

__version__ = "0.1.0"

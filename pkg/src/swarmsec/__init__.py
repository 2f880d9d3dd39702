"""UAV-swarm collaborative beamforming with secrecy and energy, plus a diffusion-actor TD3 learner."""

__version__ = "0.1.0"

"""Contraction certificates, gain synthesis and simulation for delayed networks
with multiplex integral control."""

__version__ = "0.1.0"

from .certify import Certificate, Transformation, certify, iss_envelope
from .errors import ContractNetError
from .halanay import HalanayParams, decay_envelope, solve_rate
from .linalg import BlockPartition, NormSpec, matrix_measure, spectral_norm
from .netmodel import AgentDynamics, Channel, DelaySchedule, DisturbanceModel, MultiplexNetwork
from .simulator import SimConfig, Trace, simulate

__all__ = [
    "AgentDynamics", "BlockPartition", "Certificate", "Channel", "ContractNetError", "DelaySchedule",
    "DisturbanceModel", "HalanayParams", "MultiplexNetwork", "NormSpec", "SimConfig", "Trace",
    "Transformation", "certify", "decay_envelope", "iss_envelope", "matrix_measure", "simulate",
    "solve_rate", "spectral_norm",
]

"""
Markovian noise: finite chains, autoregressive data, mixing diagnostics.

Example usage:
    from src.noise import FiniteChain, mixing_time

    chain = FiniteChain([[0.7, 0.3], [0.3, 0.7]])
    mixing_time(chain, 0.01)  # 5
"""

from .chain import (
    ChainConfig,
    FiniteChain,
    MixingProfile,
    bias_profile,
    fit_mixing_constant,
    fit_through_origin,
    mixing_time,
    pair_chain,
    stationary_distribution,
    tv_distance,
    tv_profile,
)
from .sources import ARSource, FiniteChainSource, MarkovSource, MixingSurrogate, NoiseStream

__all__ = [
    "ARSource",
    "ChainConfig",
    "FiniteChain",
    "FiniteChainSource",
    "MarkovSource",
    "MixingProfile",
    "MixingSurrogate",
    "NoiseStream",
    "bias_profile",
    "fit_mixing_constant",
    "fit_through_origin",
    "mixing_time",
    "pair_chain",
    "stationary_distribution",
    "tv_distance",
    "tv_profile",
]

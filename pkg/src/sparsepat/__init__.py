"""Pilot-aided transmission over sparse frequency-selective block-fading channels.

Support-conditional MMSE channel estimation, Bayes-averaged and decoupled
decoding, PASE/DASD support decoders and a Monte Carlo harness.
"""

from .codec import Codebook, build_codebook, check_crc, crc_bin, split_composite
from .decode import (
    DecodeResult,
    effective_noise_cov,
    ml_decode_nonsparse,
    ml_decode_sparse,
    wmd_decode,
)
from .estimation import (
    SupportHypothesisEstimate,
    closed_form_mse,
    mmse_data_refine,
    mmse_pilot_estimate,
    support_posterior,
)
from .model import (
    BlockRealization,
    ChannelSpec,
    Frame,
    dft_submatrix,
    draw_block,
    enumerate_supports,
    make_spec,
    simulate_frame,
    transmit_receive,
    validate_pilot_pattern,
)
from .support import PaseResult, dasd_decode, pase_detect, pase_detect_fixed_support

__version__ = "0.1.0"

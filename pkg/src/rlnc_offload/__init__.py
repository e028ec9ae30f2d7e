"""RLNC-based secure data offloading for vehicles driving past a row of roadside units.

Coded packets of each source message are spread over several RSU service
areas so that a single stationary eavesdropper rarely collects enough of them
to decode, while the fog (the union of all RSUs) still does.
"""

from .analytic import intercept_probability, p_full_rank, reception_pmf, recovery_probability
from .errors import ConfigError, DomainError, NotReadyError
from .gf import FieldSpec, gf_add, gf_inv, gf_mul, matrix_rank
from .rlnc import (
    CodedPacket,
    DecoderState,
    SourceMessage,
    decoder_extract,
    decoder_ingest,
    encode_packet,
    reassemble_stream,
    segment_stream,
)
from .sim import (
    ChannelModel,
    Estimate,
    ScenarioConfig,
    TransmissionPlan,
    build_schedule,
    pep_at,
    run_monte_carlo,
    run_trial,
    success_probabilities,
)

__version__ = "0.1.0"

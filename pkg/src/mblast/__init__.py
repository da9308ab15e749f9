"""Layered MIMO detection (reliability-ordered SIC and baselines) with
cross-validated statistical and outage analysis."""

__version__ = "0.1.0"

from .channel import ChannelConfig, LinkBudget, draw_channel, noise_variance_for_snr, transmit
from .detectors import (
    BinaryOrderingStatistic,
    DetectionTrace,
    TooLarge,
    binary_ordering_statistic,
    detect_mblast,
    detect_ml,
    detect_vblast,
    detect_zf,
    post_processing_snr,
    reliability,
)
from .linalg import RankDeficient, gram_inverse_diagonal, null_component, pseudoinverse, zero_columns
from .modulation import (
    Alphabet,
    BinaryAlphabet,
    NotInAlphabet,
    alphabet_by_name,
    bfsk,
    bpsk,
    delta_delta,
    qam16,
    quantize,
    random_symbols,
)
from .montecarlo import (
    EmpiricalDistribution,
    SerPoint,
    SimPlan,
    estimate_outage_empirical,
    estimate_pdf_empirical,
    run_ser_sweep,
)
from .outage import (
    OutageCurve,
    OutageQuery,
    analytical_curve,
    angle_pdf,
    chi2_cdf,
    chi2_pdf,
    f1,
    f1_tilde,
    f2,
    prob_P_closed,
    prob_P_limit,
    prob_P_linearized,
    prob_P_numeric,
    prob_P_slope,
)
from .stats import (
    RatioModel,
    beta_coefficient,
    pdf_ratio_exact,
    pdf_ratio_high_snr,
    pdf_ratio_low_snr,
    pdf_uj_imperfect,
    pdf_uj_perfect,
    sigma_bar_sq,
    simulate_uj,
)

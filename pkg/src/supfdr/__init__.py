"""Online multiple testing with SupFDR control: baseline, closed and donation procedures."""

__version__ = "0.1.0"

from .baselines import EBH, ELOND, ETOAD, RLOND, OnlineEBH, ebh_offline, elond_level, rlond_level
from .calibration import PValueCalibrator, calibrate_p, calibrate_stream, reshape_beta
from .closure import (
    ClosedELOND,
    ClosedELONDAlt,
    ClosedRLOND,
    closure_membership,
    ecollection_value,
)
from .core import (
    CapabilityError,
    ConfigError,
    DomainError,
    GammaSequence,
    Observation,
    ParseError,
    RejectionRecord,
    fdp,
    gamma_default,
    gamma_validate,
    harmonic,
    sup_fdp,
)
from .donation import (
    DonationEBH,
    DonationELOND,
    DonationETOAD,
    DonationOnlineEBH,
    DonationRLOND,
    RandomizedDonationELOND,
    donation_ebh_offline,
    restricted_round,
)
from .ledger import WealthLedger

__all__ = [
    "EBH", "ELOND", "ETOAD", "RLOND", "OnlineEBH", "ebh_offline", "elond_level", "rlond_level",
    "PValueCalibrator", "calibrate_p", "calibrate_stream", "reshape_beta",
    "ClosedELOND", "ClosedELONDAlt", "ClosedRLOND", "closure_membership", "ecollection_value",
    "CapabilityError", "ConfigError", "DomainError", "GammaSequence", "Observation", "ParseError",
    "RejectionRecord", "fdp", "gamma_default", "gamma_validate", "harmonic", "sup_fdp",
    "DonationEBH", "DonationELOND", "DonationETOAD", "DonationOnlineEBH", "DonationRLOND",
    "RandomizedDonationELOND", "donation_ebh_offline", "restricted_round",
    "WealthLedger",
]

"""Relativistic spin observables and Stern-Gerlach measurement modelling."""

from . import lorentz, observable, spinor, tomography, wkbsim
from .errors import DomainError, IntegrationError, UnderdeterminedError
from .lorentz import LorentzPair
from .observable import SGConfig, compare_operators, sg_direction, sg_operator
from .spinor import SpinObservable, Spinor, eigenstates, expectation, from_rest_frame, hermitian_observable
from .tomography import BlochState, MeasurementRecord, predict_mean, reconstruct
from .wkbsim import FieldProfile, WKBPacket, run_measurement, split

__all__ = [
    "BlochState",
    "DomainError",
    "FieldProfile",
    "IntegrationError",
    "LorentzPair",
    "MeasurementRecord",
    "SGConfig",
    "SpinObservable",
    "Spinor",
    "UnderdeterminedError",
    "WKBPacket",
    "compare_operators",
    "eigenstates",
    "expectation",
    "from_rest_frame",
    "hermitian_observable",
    "lorentz",
    "observable",
    "predict_mean",
    "reconstruct",
    "run_measurement",
    "sg_direction",
    "sg_operator",
    "spinor",
    "split",
    "tomography",
    "wkbsim",
]

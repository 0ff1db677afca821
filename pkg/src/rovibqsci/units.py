"""Unit conversions. Internals run in Hartree atomic units; I/O is in cm^-1."""

from scipy.constants import physical_constants as _pc

#: Hartree per cm^-1 (CODATA, ~4.556335e-6).
CM1_TO_HARTREE = _pc["inverse meter-hartree relationship"][0] * 100.0
HARTREE_TO_CM1 = 1.0 / CM1_TO_HARTREE

#: Electron masses per unified atomic mass unit.
AMU_TO_ME = 1.0 / _pc["electron mass in u"][0]

#: Atomic units of time per femtosecond (10 a.u. ~ 0.24 fs).
FS_TO_AU = 1e-15 / _pc["atomic unit of time"][0]
AU_TO_FS = 1.0 / FS_TO_AU


def cm1_to_hartree(x):
    return x * CM1_TO_HARTREE


def hartree_to_cm1(x):
    return x * HARTREE_TO_CM1

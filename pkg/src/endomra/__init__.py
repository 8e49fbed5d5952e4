"""Multiresolution analysis for finite-to-one endomorphisms.

Modules
-------
endo
    Subshifts of finite type and ``x -> Nx mod 1`` with exact points and cycles.
measure
    Strongly invariant and Perron-Frobenius measures, exact integration.
ruelle
    Filters, transfer operators, harmonic functions, W-cycles, ergodic constants.
solenoid
    Backward path spaces ``N_C``, the measure ``lambda_C`` and the shift ``U``.
mra
    Scaling function, ``h_C``, correlation and scaling identities, purity.
cli
    JSON-config experiment runner.
"""

__version__ = "0.1.0"

class SpinNoiseMessages:
    """
    User facing messages.
    """

    SMALL_ANGLE_VIOLATION = (
        "Polarimeter rotation exceeds the small-angle limit of 0.1 rad. "
        "Check the Faraday coupling G_F and the polarized spin magnitude."
    )

    NON_FINITE_STATE = "Spin state became non-finite during integration."

    ALIAS_VIOLATION = "Lock-in settings violate the Nyquist condition."

    NON_CONVERGENCE = "Spectral fit did not converge within the iteration limit."

    BOOTSTRAP_DIVERGED = "Too many bootstrap replicas failed to converge."

    SINGULAR_FIT = "Power-law design matrix is singular (all powers equal?)."

    NON_POSITIVE = "Offset-subtracted values must be positive for a log-log slope."

    UNDEFINED_RATIO = "dB ratio is undefined for non-positive coefficients."

    ALL_BINS_MASKED = "Every bin of the spectrum is masked; nothing to fit."

    INSUFFICIENT_POINTS = "Not enough points for the requested fit."

    INVALID_CONFIG = """
Configuration is invalid.

Run `spinnoise selftest --help` or see configs/ for working examples.
"""

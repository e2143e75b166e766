"""Numerical tolerances shared by every module.

Everything here is 8-dimensional dense linear algebra, so the bounds are tight.
"""

NORM_TOL = 1e-12
HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-12
PSD_TOL = 1e-10
UNITARY_TOL = 1e-12
ORTHONORMAL_TOL = 1e-12
PROB_SUM_TOL = 1e-10
SPECTRUM_TOL = 1e-9
CLOSED_FORM_TOL = 1e-9
SYMMETRY_TOL = 1e-10
CASE_EQUALITY_TOL = 1e-12
RATIO_TOL = 1e-9
IDENTIFY_TOL = 1e-6
SINGULAR_TOL = 1e-9
SAFETY_MARGIN = 1e-3
RECOVERY_TOL = 1e-6
C_SLACK = 1e-6
P_INDEPENDENCE_TOL = 1e-10
KRAUS_TOL = 1e-12

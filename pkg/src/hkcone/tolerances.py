"""Shared default tolerances."""

#: algebraic identities that hold exactly up to rounding
EQ_TOL = 1e-12
#: quadrature and finite-difference checks
QUAD_TOL = 1e-6
#: KKT residuals of the entropy-transport solver
SOLVER_TOL = 1e-6
#: atoms lighter than this fraction of the total mass are dropped
MASS_FLOOR_REL = 1e-15
#: merge radius used when reading measures from files
CLI_MERGE_RADIUS = 1e-9
#: floor applied to densities inside logarithms
LOG_FLOOR = 1e-300

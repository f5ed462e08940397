from choquet.oracle.bumps import (
    BumpKernel,
    BumpMode,
    BumpSpec,
    SameMeanResult,
    analytic_same_mean,
    analytic_same_variance,
    bump_F_G,
    epanechnikov_cdf,
    sample_bump,
)
from choquet.oracle.lp import (
    DiscreteVdcLP,
    LpVdcResult,
    brute_force_vdc,
    lp_d_ct,
    lp_vdc_discrete,
    oracle_table,
    random_discrete_pair,
)
from choquet.oracle.simplex import LinearProgram, LpSolution, simplex_solve

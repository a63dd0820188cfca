"""Chance-constrained gas network dispatch with affine recourse."""

from ._ccgas import *  # noqa: F401,F403
from ._ccgas import __doc__  # noqa: F401


def solve(network, epsilon=0.05, psi_pressure=0.0, psi_flow=0.0, distribution=None, mask=None):
    """Stationary point, linearization, uncertainty model and policy solution in one call."""
    import numpy as np

    from . import _ccgas as c

    point = c.solve_deterministic(network)
    lin = c.linearize(point, network)
    unc = c.budgeted_uncertainty(
        network,
        lin,
        epsilon,
        distribution if distribution is not None else c.Distribution.gaussian,
        mask if mask is not None else c.PolicyMask.all_assets,
    )
    opt = c.PolicyOptions()
    opt.psi_pressure = np.full(network.num_nodes, float(psi_pressure))
    opt.psi_flow = np.full(network.num_edges, float(psi_flow))
    if mask is not None:
        opt.mask = mask
    sol = c.optimize_policies(network, lin, unc, opt)
    return point, lin, unc, opt, sol

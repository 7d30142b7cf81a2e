"""Blind interference alignment for a full-duplex cell whose BS has
reconfigurable transmit and receive antennas.

Modules:
    linalg        IDFT matrices, rank, right pseudoinverse, Kronecker/block helpers
    network       topology, seeded channel draws, mode schedules, block I/O
    dof           exact sum-DoF formulas, allocation enumeration, outer region
    no_csit       scheme without transmit-side CSI
    partial_csit  scheme with BS-side CSI, plus the rank checks
    rates         finite-SNR rates and single-cell Monte Carlo sweeps
    multicell     seven-cell wrap-around experiment with scheduling
    cli           command-line front end
"""

__version__ = "0.1.0"

from .dof import (  # noqa: E402
    DofBounds,
    SymbolAllocation,
    default_allocation,
    distinguished_allocations,
    enumerate_allocations,
    region_feasible,
    sum_dof_no_csit,
    sum_dof_partial_csit,
)
from .network import ChannelRealization, ModeSchedule, NetworkConfig, sample_channels  # noqa: E402

__all__ = [
    "__version__",
    "ChannelRealization",
    "DofBounds",
    "ModeSchedule",
    "NetworkConfig",
    "SymbolAllocation",
    "default_allocation",
    "distinguished_allocations",
    "enumerate_allocations",
    "region_feasible",
    "sample_channels",
    "sum_dof_no_csit",
    "sum_dof_partial_csit",
]

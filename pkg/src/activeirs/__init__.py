"""Throughput-maximizing resource allocation for an amplifying-IRS uplink.

The package provides three scheme solvers (time-division with per-device
beams, simultaneous access with one shared beam, and a grouped mix of the
two), the small convex solvers they are built on, brute-force graders for
tiny instances, and a sweep harness with a CLI.
"""

from .channels import (
    ChannelSet,
    Scenario,
    amplification_power,
    dbm_to_watt,
    effective_gain,
    generate_channels,
    path_loss,
)
from .hybrid import (
    Grouping,
    HybridSolution,
    hybrid_throughput,
    partition_devices,
    signaling_overhead,
    solve_hybrid,
)
from .noma import NomaSolution, noma_throughput, power_step, solve_noma
from .tdma import (
    TdmaSolution,
    equal_snr_time_allocation,
    solve_passive_tdma,
    solve_tdma,
    solve_tdma_single_beam,
    tdma_throughput,
)

__version__ = "0.1.0"

"""Reference network configurations used across the test suite.

Three parameter families: a dense-pico validation setup (cross-checking
analytics against Monte Carlo), a small-antenna optimization setup (order
behavior and optimal nulling budget), and two large-antenna scheme
comparison setups.  User density for the validation setup is a choice of
this suite: large enough that almost no pico cell is empty, which is the
regime the fitted load/offloaded-count pmfs are built for.
"""

from hetnet_nulling.config import NetworkConfig, TierParams, db_to_linear


def validation_config(bias_db: float = 5.0, in_dof: int = 4) -> NetworkConfig:
    return NetworkConfig(
        macro=TierParams(density=1e-4, pathloss=4.0, power=10.0, antennas=8),
        pico=TierParams(density=5e-4, pathloss=4.0, power=1.0, antennas=4),
        user_density=0.01,
        bias=db_to_linear(bias_db),
        bandwidth=10e6,
        in_dof=in_dof,
    )


def optimization_config(bias_db: float = 4.6, in_dof: int = 0) -> NetworkConfig:
    return NetworkConfig(
        macro=TierParams(density=1e-4, pathloss=3.0, power=10.0, antennas=5),
        pico=TierParams(density=1.5e-3, pathloss=3.0, power=1.0, antennas=2),
        user_density=0.01,
        bias=db_to_linear(bias_db),
        bandwidth=10e6,
        in_dof=in_dof,
    )


def comparison_config(large_arrays: bool = False, bias_db: float = 7.0,
                      in_dof: int = 0) -> NetworkConfig:
    n1, n2 = (18, 16) if large_arrays else (8, 6)
    return NetworkConfig(
        macro=TierParams(density=8e-5, pathloss=4.5, power=db_to_linear(13.0), antennas=n1),
        pico=TierParams(density=1e-3, pathloss=4.7, power=1.0, antennas=n2),
        user_density=0.05,
        bias=db_to_linear(bias_db),
        bandwidth=10e6,
        in_dof=in_dof,
    )


COMPARISON_TAU = 5e5  # bit/s, the threshold the comparison setups are scored at

"""Temperature-adjusted two-population mortality projections.

Couples a distributed-lag non-linear temperature-mortality model with a
coherent Li-Lee mortality model to project death rates and life-expectancy
losses under climate temperature scenarios.
"""

__version__ = "0.1.0"

GENDERS = ("female", "male")

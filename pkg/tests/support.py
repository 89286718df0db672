"""Random instance generation shared by property and acceptance tests."""

import numpy as np

from carbonsched.curves import MarginalCapacityCurve
from carbonsched.schedule import JobSpec
from conftest import trace_of


def random_monotone_curve(rng: np.random.Generator, m: int, M: int) -> MarginalCapacityCurve:
    values = [1.0]
    for _ in range(M - m):
        values.append(values[-1] * rng.uniform(0.3, 1.0))
    return MarginalCapacityCurve(m=m, M=M, values=tuple(values))


def random_instance(
    rng: np.random.Generator,
    n_range=(2, 6),
    m: int = 1,
    max_servers_range=(1, 3),
):
    """A feasible (job, curve, trace) triple with random length and deadline.

    The length is drawn so the job fits at minimum servers (the deadline
    invariant), which also keeps every baseline policy feasible.
    """
    n = int(rng.integers(n_range[0], n_range[1] + 1))
    M = max(m, int(rng.integers(max_servers_range[0], max_servers_range[1] + 1)))
    curve = random_monotone_curve(rng, m, M)
    trace = trace_of([float(rng.uniform(1.0, 100.0)) for _ in range(n)])
    length = float(rng.uniform(0.1, n))
    job = JobSpec(
        name="random", arrival_slot=0, base_length_slots=length,
        min_servers=m, max_servers=M, completion_slot=n,
    )
    return job, curve, trace

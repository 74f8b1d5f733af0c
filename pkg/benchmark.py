"""
Run with `pytest ./benchmark.py -s`.
"""
import time

import numpy as np
import pytest

from tentacle.dynamics import enumerate_closed_characteristics
from tentacle.floer import LoopState, critical_loop, integrate_batch, integrate_flow, newton_refine
from tentacle.symplectic import QuadraticHamiltonian

H_EX = QuadraticHamiltonian(np.diag([1.0, -1.0, 1.0, 1.0]), 0.5)


def perturbed_circle(N: int, seed: int, amplitude: float = 0.01) -> LoopState:
    (orbit, *_) = enumerate_closed_characteristics(H_EX, 1)
    start = critical_loop(orbit, N, "central")
    rng = np.random.default_rng(seed)
    t = np.arange(N) / N
    a, b = rng.standard_normal((2, H_EX.dim))
    shift = np.outer(np.cos(2 * np.pi * t), a) + np.outer(np.sin(2 * np.pi * t), b)
    return LoopState(start.v + amplitude * shift, start.eta)


@pytest.fixture(scope="module", autouse=True)
def print_title():
    print(f"\n{'Name':^30}", "Average Time", end="", flush=True)


@pytest.mark.parametrize("N", [64, 128, 256, 512])
def test_flow(N):
    u = perturbed_circle(N, 0)
    start_time = time.time_ns()
    for _ in range(3):
        integrate_flow(u, H_EX, 0.1)
    print(f"\n{f'flow N={N}':^30}", (time.time_ns() - start_time) / 3 / 10**9, end="")


@pytest.mark.parametrize("N", [32, 64, 128])
def test_newton(N):
    u = perturbed_circle(N, 1, amplitude=1e-4)
    start_time = time.time_ns()
    for _ in range(3):
        newton_refine(u, H_EX, "spectral")
    print(f"\n{f'newton N={N}':^30}", (time.time_ns() - start_time) / 3 / 10**9, end="")


@pytest.mark.parametrize("jobs", [1, 4])
def test_batch(jobs):
    states = [perturbed_circle(128, seed) for seed in range(8)]
    start_time = time.time_ns()
    integrate_batch(states, H_EX, 0.1, jobs=jobs)
    print(f"\n{f'batch of 8, jobs={jobs}':^30}", (time.time_ns() - start_time) / 8 / 10**9, end="")

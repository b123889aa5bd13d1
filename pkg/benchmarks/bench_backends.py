"""Benchmark the compiled trajectory kernel against the pure-python one.

Runs the same seeded workload through both backends and reports per-step
cost and speedup.  Usage:

    python benchmarks/bench_backends.py [--steps N] [--mcg]
"""

import argparse
import time

from spintrack import backend as bk
from spintrack import experiment as ex
from spintrack.control import LqrParams
from spintrack.ekf import OupEkfModel, VdpEkfModel
from spintrack.experiment import ScenarioConfig
from spintrack.sensor import SensorParams
from spintrack.signals import OupParams, VdpParams


def scenario(kind: str, n_steps: int) -> ScenarioConfig:
    sensor = SensorParams(n_mean=1e13, n_sigma=1e11, meas_strength=1e-8,
                          efficiency=1.0, kappa_loc=100.0, kappa_coll=0.0,
                          dt=1e-7)
    horizon = n_steps * sensor.dt
    if kind == "oup":
        signal = OupParams(chi=1.0, q_omega=1e6, omega_bar=sensor.omega_bar)
        model = OupEkfModel(sensor, chi_k=1.0, q_k=1e6)
    else:
        signal = VdpParams(noise_density=2.5e-7)
        model = VdpEkfModel(sensor, q_k=4e-5)
    return ScenarioConfig(sensor=sensor, signal=signal, ekf_model=model,
                          lqr=LqrParams(1.0), horizon=horizon,
                          n_trajectories=1, base_seed=1234, record_stride=100)


def time_backend(cfg: ScenarioConfig, name: str, repeats: int) -> float:
    ex.run_trajectory(cfg, 0, backend=name)  # warm-up / JIT import
    best = float("inf")
    for _ in range(repeats):
        started = time.perf_counter()
        ex.run_trajectory(cfg, 0, backend=name)
        best = min(best, time.perf_counter() - started)
    return best


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--steps", type=int, default=20_000,
                        help="steps per trajectory (default 20000)")
    parser.add_argument("--mcg", action="store_true",
                        help="benchmark the 9-dimensional waveform loop too")
    args = parser.parse_args()

    kinds = ["oup"] + (["vdp"] if args.mcg else [])
    backends = bk.available_backends()
    print(f"backends: {', '.join(backends)}   steps/trajectory: {args.steps}")
    for kind in kinds:
        cfg = scenario(kind, args.steps)
        results = {}
        for name in backends:
            repeats = 3 if name == "compiled" else 1
            elapsed = time_backend(cfg, name, repeats)
            results[name] = elapsed
            print(f"  {kind:4s} {name:9s} {elapsed:8.3f} s  "
                  f"({elapsed / args.steps * 1e9:9.0f} ns/step)")
        if "compiled" in results and "python" in results:
            print(f"  {kind:4s} speedup   {results['python'] / results['compiled']:8.1f} x")


if __name__ == "__main__":
    main()

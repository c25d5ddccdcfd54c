"""Measure worst-case settling of the shipped configuration.

Runs the settling probe on several seeds and prints the per-seed and worst
depth and attitude settling times. The worst values, rounded up to the next
second, are what missions.DEPTH_SETTLING_TIME and ATTITUDE_SETTLING_TIME hold.
"""
import argparse
import math

from vbcsim.config import load_config
from vbcsim.missions import measure_settling


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("-c", "--config")
    ap.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    args = ap.parse_args(argv)
    cfg = load_config(args.config, environ={})
    worst_d = worst_a = 0.0
    for seed in args.seeds:
        est = measure_settling(cfg.geometry, cfg.environment, cfg.controller, cfg.sim, seed)
        print(f"seed {seed}: depth {est.depth:.2f} s  attitude {est.attitude:.2f} s")
        worst_d, worst_a = max(worst_d, est.depth), max(worst_a, est.attitude)
    print(f"worst: depth {worst_d:.2f} s -> {math.ceil(worst_d)}  "
          f"attitude {worst_a:.2f} s -> {math.ceil(worst_a)}")


if __name__ == "__main__":
    main()

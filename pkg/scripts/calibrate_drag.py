"""Pick the in-plane translational drag so a default pitch sawtooth fits the tank.

The along-plate coefficient c_x is bisected until four pitch cycles carry the
vehicle ``--target`` metres (default 2.5 m: a 3 m tank less one body length).
The lateral coefficient follows as c_y = 3 c_x and the plate-normal c_z is held
fixed. Prints the bisection trace and the chosen triple.
"""
import argparse
import math

from vbcsim.missions import SimSettings, run_mission, sawtooth_mission
from vbcsim.sim import DragModel
from vbcsim.vehicle import VehicleGeometry, neutral_trim


def transit(cx, cz, geom, leg):
    drag = DragModel(translational=(cx, 3 * cx, cz))
    res = run_mission(sawtooth_mission("pitch", leg_duration=leg), geom, sim=SimSettings(drag=drag))
    return abs(res.metrics.net_displacement[0])


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--target", type=float, default=2.5)
    ap.add_argument("--cz", type=float, default=90.0)
    ap.add_argument("--lo", type=float, default=8.0)
    ap.add_argument("--hi", type=float, default=29.0, help="keeps c_y = 3 c_x below c_z")
    ap.add_argument("--leg", type=float, default=None)
    ap.add_argument("--iters", type=int, default=8)
    args = ap.parse_args(argv)

    geom = neutral_trim(VehicleGeometry())
    lo, hi = args.lo, args.hi
    for _ in range(args.iters):
        mid = 0.5 * (lo + hi)
        d = transit(mid, args.cz, geom, args.leg)
        print(f"c_x={mid:7.3f}  |net x|={d:.3f} m")
        if d > args.target:
            lo = mid
        else:
            hi = mid
    cx = math.floor(0.5 * (lo + hi))
    print(f"chosen translational drag: ({cx}, {3 * cx}, {args.cz:g})  "
          f"|net x|={transit(cx, args.cz, geom, args.leg):.3f} m")


if __name__ == "__main__":
    main()

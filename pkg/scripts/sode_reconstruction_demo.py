#!/usr/bin/env python3
"""Second-order reconstruction walkthrough.

Build a tangent-bundle connection whose coefficients come from a force
potential, check the two sufficiency conditions (the dilation field is
horizontally parallel, the horizontal torsion vanishes), reconstruct the
induced second-order field, and compare the induced connection with the
input.  A deliberately inhomogeneous control shows the conditions failing.
"""

import sys

from ehresmann.geometry import CheckConfig
from ehresmann.scenarios import (
    nonlinear_tangent, potential_connection, sode_sufficiency_check,
)


def show(rep):
    print(f"  dilation-parallel deviation:   {rep.nabla_delta_dev:.3e}")
    print(f"  horizontal-torsion deviation:  {rep.horizontal_torsion_dev:.3e}")
    print(f"  conditions met: {rep.conditions_met}")
    if rep.conditions_met:
        print(f"  reconstruction deviation:      {rep.reconstruction_dev:.3e}")
        print(f"  reconstructed field is a spray: {rep.reconstructed_spray}")


def main() -> int:
    cfg = CheckConfig(samples=12)

    print("potential-derived coefficients (f1 = -(u1^2)-u1*u2, "
          "f2 = x1*u1^2-u2^2):")
    gamma = potential_connection(2, ["-(u1^2)-u1*u2", "x1*u1^2-u2^2"])
    scen = nonlinear_tangent(2, gamma, cfg, name="demo-potential")
    good = sode_sufficiency_check(scen, cfg)
    show(good)

    print("\ninhomogeneous control (G^1_1 = 1):")
    control = nonlinear_tangent(1, {(1, 1): "1"}, cfg, name="demo-control")
    bad = sode_sufficiency_check(control, cfg)
    show(bad)

    ok = good.conditions_met and good.reconstruction_dev < cfg.tolerance \
        and good.reconstructed_spray and not bad.conditions_met
    print("\ndemo", "ok" if ok else "FAILED")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())

"""Detection-design numbers for the reference link."""

import argparse
import math

import numpy as np

from lpm import design, experiments as ex, fiberlink as fl


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--a", type=float, default=3.0)
    args = ap.parse_args()
    s2, g, dz, integral = ex.design_inputs()
    print(f"reciprocal symbol integral: {integral:.4f}")
    for loss in (1.0, 2.0, 3.0):
        r = design.required_snr(design.DetectionSpec(loss, args.a))
        print(f"required SNR for {loss:.1f} dB: {10 * math.log10(r):.2f} dB")
    spec = design.DetectionSpec(1.0, args.a)
    for p in (3, 0, -5):
        n = design.required_samples(spec, g * fl.dbm_to_w(p), s2, dz, integral)
        print(f"N for 1.0 dB at {p:+d} dBm: {n:.3g}")
    p = design.required_power(spec, 1e7, s2, dz, integral, g)
    print(f"power for 1.0 dB with N=1e7: {fl.w_to_dbm(p):.2f} dBm")
    dr = design.dynamic_range(design.DetectionSpec(2.0, args.a), 1e7, fl.dbm_to_w(2), s2, dz, integral, g)
    print(f"dynamic range for 2.0 dB with N=1e7, 2 dBm launch: {dr:.2f} dB")
    prof = fl.true_profile(fl.reference_link(), dz)
    for n in (6.1e6, 2.5e7):
        loss = design.detectable_loss_profile(prof.values, n, s2, args.a, dz, integral)
        print(f"N={n:.2g}: detectable loss {loss[0]:.2f} dB at span input, {loss[49]:.2f} dB at span output, "
              f"worst {np.nanmax(loss):.2f} dB")


if __name__ == "__main__":
    main()

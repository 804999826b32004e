"""Single-pulse amplitudes that place the nominal device at each target level."""

import argparse

from fefetsim.device import DeviceParams
from fefetsim.programming import calibrate_single_pulse
from fefetsim.sensing import AdcConfig, target_levels


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--domains", type=int, default=150)
    ap.add_argument("--pulse-ns", type=float, default=100.0)
    args = ap.parse_args()
    for bpc in (1, 2, 3):
        params = DeviceParams(n_domains=args.domains).nominal()
        scheme = calibrate_single_pulse(params, target_levels(AdcConfig(bits_per_cell=bpc)),
                                        args.pulse_ns / 1e9)
        print(f"{bpc}b: " + ", ".join(f"{v:.3f} V" for v in scheme.amplitude_per_level[1:]))


if __name__ == "__main__":
    main()

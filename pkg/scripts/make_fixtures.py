"""Generate the shipped synthetic fixtures as CLI-loadable config bundles.

Writes one-zone (full year and 2190 h desk year), three-zone, and
reserve-margin-stress systems plus example sweep/curve specs under --out.
"""

import argparse
from pathlib import Path

import yaml

from cemlink.fixtures import (
    crm_binding_system,
    one_zone_system,
    three_zone_system,
    write_fixture,
)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="fixtures", help="output directory")
    parser.add_argument("--hours", type=int, default=8760)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    out = Path(args.out)

    write_fixture(one_zone_system(hours=args.hours, seed=args.seed), out, "one_zone",
                  reduction={"period_length": 24, "n_periods": 30, "seed": args.seed})
    write_fixture(one_zone_system(hours=2190, seed=args.seed), out, "one_zone_desk",
                  reduction={"period_length": 24, "n_periods": 10, "seed": args.seed})
    write_fixture(one_zone_system(hours=2190, seed=2, include_gas=True,
                                  include_nuclear=False), out, "one_zone_gas",
                  reduction={"period_length": 24, "n_periods": 20, "seed": 1})
    write_fixture(three_zone_system(hours=args.hours, seed=args.seed + 1,
                                    include_ldes=True), out, "three_zone",
                  model={"ldes_linking": True, "virtual_discharge": True, "crm_enabled": True,
                         "forced_ldes": {"resource": "ldes", "capacity": 5.0, "duration": 200.0}})
    write_fixture(crm_binding_system(), out, "crm_stress",
                  reduction={"period_length": 168, "n_periods": 4, "seed": 5})

    (out / "sweep_temporal.yaml").write_text(yaml.safe_dump({
        "sweep": {
            "n_periods": [5, 10, 20, 30, 52],
            "period_lengths": [24, 168],
            "ldes_linking": [True, False],
            "seed": args.seed,
        }
    }, sort_keys=False))
    (out / "curve_decarb.yaml").write_text(yaml.safe_dump({
        "curve": {
            "carbon_prices": [0, 25, 200, 2000],
            "ldes_costs": [25_000, 100_000, 1_000_000],
            "linking": [True, False],
        }
    }, sort_keys=False))
    print(f"fixtures written under {out}/")


if __name__ == "__main__":
    main()

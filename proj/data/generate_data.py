#!/usr/bin/env python3
"""Regenerates the synthetic data shipped under data/.

The load series are synthetic but cyclostationary with a one-day period, in
the spirit of utility-scale hourly demand: a daily sinusoid, a weekday
offset, and autoregressive noise.  The 24-bus system follows the classic
reliability test system layout (24 buses, 38 branches) with a 33-unit fleet
and stylized cost/ramp/minimum-time parameters.  Everything is seeded, so
the committed files are reproducible byte for byte.
"""

import json
import math
import random
from datetime import datetime, timedelta
from pathlib import Path

HERE = Path(__file__).parent


def write_load_csv(path, start, hours, base, swing, noise_scale, seed, floor, ceil):
    rng = random.Random(seed)
    rows = ["timestamp,load_mw"]
    ar = 0.0
    t0 = datetime.fromisoformat(start)
    for k in range(hours):
        ts = t0 + timedelta(hours=k)
        h = ts.hour
        day = (ts - t0).days
        daily = swing * math.sin(2 * math.pi * (h - 10) / 24.0)
        ripple = 0.25 * swing * math.sin(4 * math.pi * h / 24.0)
        weekday = -0.04 * base if ts.weekday() >= 5 else 0.02 * base
        slow = 0.03 * base * math.sin(2 * math.pi * day / 30.0)
        ar = 0.7 * ar + rng.gauss(0.0, noise_scale)
        load = max(floor, min(ceil, base + daily + ripple + weekday + slow + ar))
        rows.append(f"{ts.isoformat(timespec='seconds')},{load:.3f}")
    path.write_text("\n".join(rows) + "\n")
    print(f"{path}: {hours} rows")


def rts_system():
    # bus loads (MW) of the 2850 MW system peak; share = mw / 2850
    bus_mw = {1: 108, 2: 97, 3: 180, 4: 74, 5: 71, 6: 136, 7: 125, 8: 171, 9: 175,
              10: 195, 13: 265, 14: 194, 15: 317, 16: 100, 18: 333, 19: 181, 20: 128}
    buses = [{"id": b, "load_share": bus_mw.get(b, 0) / 2850.0} for b in range(1, 25)]

    lines_raw = [
        (1, 2, 0.0139, 175), (1, 3, 0.2112, 175), (1, 5, 0.0845, 175),
        (2, 4, 0.1267, 175), (2, 6, 0.1920, 175), (3, 9, 0.1190, 175),
        (3, 24, 0.0839, 400), (4, 9, 0.1037, 175), (5, 10, 0.0883, 175),
        (6, 10, 0.0605, 175), (7, 8, 0.0614, 175), (8, 9, 0.1651, 175),
        (8, 10, 0.1651, 175), (9, 11, 0.0839, 400), (9, 12, 0.0839, 400),
        (10, 11, 0.0839, 400), (10, 12, 0.0839, 400), (11, 13, 0.0476, 500),
        (11, 14, 0.0418, 500), (12, 13, 0.0476, 500), (12, 23, 0.0966, 500),
        (13, 23, 0.0865, 500), (14, 16, 0.0389, 500), (15, 16, 0.0173, 500),
        (15, 21, 0.0490, 500), (15, 21, 0.0490, 500), (15, 24, 0.0519, 500),
        (16, 17, 0.0259, 500), (16, 19, 0.0231, 500), (17, 18, 0.0144, 500),
        (17, 22, 0.1053, 500), (18, 21, 0.0259, 500), (18, 21, 0.0259, 500),
        (19, 20, 0.0396, 500), (19, 20, 0.0396, 500), (20, 23, 0.0216, 500),
        (20, 23, 0.0216, 500), (21, 22, 0.0678, 500),
    ]
    lines = [{"from": a, "to": b, "reactance": x, "limit": float(lim)}
             for a, b, x, lim in lines_raw]
    assert len(lines) == 38

    unit_types = {
        "U12": dict(p_min=2.4, p_max=12, ramp=12, c1=25.8, c0=25, su=70, sd=10, up=2, down=2),
        "U20": dict(p_min=4.0, p_max=20, ramp=20, c1=37.7, c0=30, su=50, sd=5, up=1, down=1),
        "U50h": dict(p_min=0.0, p_max=50, ramp=50, c1=0.5, c0=1, su=1, sd=1, up=1, down=1),
        "U50g": dict(p_min=10.0, p_max=50, ramp=50, c1=39.5, c0=30, su=60, sd=6, up=1, down=1),
        "U76": dict(p_min=15.2, p_max=76, ramp=38, c1=13.1, c0=60, su=450, sd=50, up=3, down=2),
        "U100": dict(p_min=25.0, p_max=100, ramp=51, c1=20.7, c0=80, su=600, sd=60, up=3, down=2),
        "U155": dict(p_min=54.25, p_max=155, ramp=78, c1=10.5, c0=100, su=900, sd=80, up=3, down=3),
        "U197": dict(p_min=69.0, p_max=197, ramp=99, c1=18.0, c0=120, su=950, sd=90, up=3, down=3),
        "U350": dict(p_min=140.0, p_max=350, ramp=175, c1=10.8, c0=150, su=1500, sd=120, up=3, down=3),
        "U400": dict(p_min=100.0, p_max=400, ramp=200, c1=4.2, c0=200, su=2500, sd=200, up=3, down=3),
    }
    placement = [
        (1, ["U20", "U20", "U76", "U76"]),
        (2, ["U20", "U20", "U76", "U76"]),
        (7, ["U100", "U100", "U100"]),
        (13, ["U197", "U197", "U197"]),
        (14, ["U50g"]),
        (15, ["U12", "U12", "U12", "U12", "U12", "U155"]),
        (16, ["U155"]),
        (18, ["U400"]),
        (21, ["U400"]),
        (22, ["U50h", "U50h", "U50h", "U50h", "U50h", "U50h"]),
        (23, ["U155", "U155", "U350"]),
    ]
    generators = []
    for bus, units in placement:
        for i, kind in enumerate(units, start=1):
            t = unit_types[kind]
            generators.append({
                "id": f"{kind}-b{bus}-{i}",
                "bus": bus,
                "p_min": t["p_min"],
                "p_max": float(t["p_max"]),
                "ramp_down": float(t["ramp"]),
                "ramp_up": float(t["ramp"]),
                "c1": t["c1"],
                "c0": float(t["c0"]),
                "startup_cost": float(t["su"]),
                "shutdown_cost": float(t["sd"]),
                "min_up": t["up"],
                "min_down": t["down"],
            })
    assert len(generators) == 33, len(generators)
    return {
        "name": "rts24 (24 buses, 33 units, 38 lines)",
        "slack_bus": 13,
        "buses": buses,
        "lines": lines,
        "generators": generators,
        "ptdf": None,
    }


def toy_system():
    return {
        "name": "toy 2-bus / 3-unit system",
        "slack_bus": 1,
        "buses": [{"id": 1, "load_share": 0.6}, {"id": 2, "load_share": 0.4}],
        "lines": [{"from": 1, "to": 2, "reactance": 0.1, "limit": 100.0}],
        "generators": [
            {"id": "coal", "bus": 1, "p_min": 20.0, "p_max": 100.0, "ramp_down": 50.0,
             "ramp_up": 50.0, "c1": 12.0, "c0": 20.0, "startup_cost": 200.0,
             "shutdown_cost": 20.0, "min_up": 2, "min_down": 2},
            {"id": "gas", "bus": 2, "p_min": 10.0, "p_max": 60.0, "ramp_down": 60.0,
             "ramp_up": 60.0, "c1": 20.0, "c0": 10.0, "startup_cost": 80.0,
             "shutdown_cost": 10.0, "min_up": 2, "min_down": 1},
            {"id": "peaker", "bus": 2, "p_min": 5.0, "p_max": 40.0, "ramp_down": 40.0,
             "ramp_up": 40.0, "c1": 35.0, "c0": 5.0, "startup_cost": 30.0,
             "shutdown_cost": 5.0, "min_up": 1, "min_down": 1},
        ],
        "ptdf": None,
    }


def main():
    (HERE / "rts24_system.json").write_text(json.dumps(rts_system(), indent=2) + "\n")
    print("rts24_system.json written")
    (HERE / "toy_system.json").write_text(json.dumps(toy_system(), indent=2) + "\n")
    print("toy_system.json written")

    # RTS-scale series: 45 days of history plus a held-out realized stretch.
    write_load_csv(HERE / "rts_load.csv", "2016-06-01T00:00:00", 45 * 24,
                   base=2150.0, swing=430.0, noise_scale=55.0, seed=20160601,
                   floor=1500.0, ceil=2950.0)
    write_load_csv(HERE / "rts_realized.csv", "2016-07-16T00:00:00", 30,
                   base=2150.0, swing=430.0, noise_scale=55.0, seed=20160716,
                   floor=1500.0, ceil=2950.0)

    # Toy-scale series for the 2-bus system (one tenth of the RTS scale).
    write_load_csv(HERE / "toy_load.csv", "2016-06-01T00:00:00", 30 * 24,
                   base=115.0, swing=28.0, noise_scale=5.0, seed=7,
                   floor=70.0, ceil=165.0)
    write_load_csv(HERE / "toy_realized.csv", "2016-07-01T00:00:00", 12,
                   base=115.0, swing=28.0, noise_scale=5.0, seed=8,
                   floor=70.0, ceil=165.0)

    (HERE / "pricing_example.json").write_text(json.dumps({
        "mode": "marginal",
        "surplus_factor": 0.1,
    }, indent=2) + "\n")
    print("pricing_example.json written")


if __name__ == "__main__":
    main()

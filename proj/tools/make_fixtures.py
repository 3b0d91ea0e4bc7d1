#!/usr/bin/env python3
"""Writes the small station/readings fixture used by the CLI smoke test."""

import math
import random
import sys
from datetime import datetime, timedelta, timezone
from pathlib import Path

STATIONS = [
    ("A01", 39.929, 116.417),
    ("A02", 39.886, 116.407),
    ("A03", 39.982, 116.348),
    ("A04", 39.914, 116.184),
    ("A05", 39.952, 116.467),
    ("A06", 39.879, 116.339),
]
HOURS = 240
START = datetime(2014, 5, 1, tzinfo=timezone.utc)


def main(out_dir: Path) -> None:
    rng = random.Random(7)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "stations.csv", "w") as f:
        f.write("station_id,latitude,longitude\n")
        for sid, lat, lon in STATIONS:
            f.write(f"{sid},{lat},{lon}\n")
    with open(out_dir / "readings.csv", "w") as f:
        f.write("timestamp,station_id,pm25,wind_speed,wind_direction\n")
        for h in range(HOURS):
            ts = (START + timedelta(hours=h)).strftime("%Y-%m-%dT%H:%M:%SZ")
            base = 80 + 50 * math.sin(2 * math.pi * h / 24) + 30 * math.sin(2 * math.pi * h / 97)
            for i, (sid, _, _) in enumerate(STATIONS):
                pm = max(0.0, base + 10 * i + rng.gauss(0, 5))
                speed = abs(rng.gauss(2.5, 1.0))
                direction = rng.uniform(0, 360)
                pm_s = "" if rng.random() < 0.03 else f"{pm:.1f}"
                wind_s = ("", "") if rng.random() < 0.02 else (f"{speed:.1f}", f"{direction:.0f}" if round(direction) < 360 else "0")
                f.write(f"{ts},{sid},{pm_s},{wind_s[0]},{wind_s[1]}\n")


if __name__ == "__main__":
    main(Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "tests" / "fixtures")

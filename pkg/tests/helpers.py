"""Shared fixtures: synthetic Met-Office-format station files."""

import math
import os

import numpy as np

HEADER = """{title}
Location: 224100E 252100N, Lat 52.139 Lon -4.570, 133 metres amsl
Estimated data is marked with a * after the value.
Missing data (more than 2 days missing in month) is marked by  ---.
Sunshine data taken from an automatic Kipp & Zonen sensor marked with a #
   yyyy  mm   tmax    tmin      af    rain     sun
              degC    degC    days      mm   hours
"""

STATIONS_16 = tuple(f"station{i:02d}" for i in range(16))


def station_row(year, month, vals, flags=("", "", "", "", "")):
    cells = []
    for v, flag in zip(vals, flags):
        cells.append("---" if v is None else f"{v:.1f}{flag}")
    return (
        f"   {year}  {month:2d}  "
        + "  ".join(f"{c:>7s}" for c in cells)
        + "\n"
    )


def synthetic_values(si, year, month):
    """Deterministic seasonal-ish values per station/month."""
    t = (year - 1960) * 12 + (month - 1)
    phase = 2 * math.pi * (month - 1) / 12
    tmax = 12.0 + 8.0 * math.sin(phase) + 0.3 * si + 0.01 * math.sin(0.7 * t + si)
    tmin = 4.0 + 6.0 * math.sin(phase) + 0.2 * si + 0.01 * math.cos(0.9 * t + 2 * si)
    af = max(0.0, 8.0 - 8.0 * math.sin(phase) + 0.1 * si)
    rain = 60.0 + 25.0 * math.sin(phase + 1.0 + 0.2 * si) + 0.5 * ((t * (si + 3)) % 7)
    sun = 90.0 + 60.0 * math.sin(phase - 0.3) + 1.0 * ((t + si) % 5)
    return [round(v, 1) for v in (tmax, tmin, af, rain, sun)]


def write_station_dir(dirpath, stations=STATIONS_16, start_year=1960, n_months=120):
    os.makedirs(dirpath, exist_ok=True)
    for si, name in enumerate(stations):
        lines = [HEADER.format(title=name.title())]
        for t in range(n_months):
            year = start_year + t // 12
            month = t % 12 + 1
            lines.append(station_row(year, month, synthetic_values(si, year, month)))
        with open(os.path.join(dirpath, f"{name}data.txt"), "w") as f:
            f.write("".join(lines))
    return list(stations)


def write_hand_fixture(dirpath, n_stations=16):
    """3 months per station with value = 100*station + 10*var + month."""
    stations = [f"hand{i:02d}" for i in range(n_stations)]
    os.makedirs(dirpath, exist_ok=True)
    for si, name in enumerate(stations):
        lines = [HEADER.format(title=name.title())]
        for month in (1, 2, 3):
            vals = [100.0 * si + 10.0 * v + month for v in range(5)]
            lines.append(station_row(2000, month, vals))
        with open(os.path.join(dirpath, f"{name}data.txt"), "w") as f:
            f.write("".join(lines))
    return stations


def hand_value(si, var, month):
    return 100.0 * si + 10.0 * var + month

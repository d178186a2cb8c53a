#!/usr/bin/env python3
"""Write the JSON fixtures under fixtures/.

Feeders are positive-sequence equivalents of the IEEE 13-, 37- and 123-node
test feeders: per-mile impedances come from the published line
configurations, spot loads are summed per bus, and the per-period load is the
base load scaled so the feeder total follows the forecast series.
"""

import json
import math
import pathlib

ROOT = pathlib.Path(__file__).resolve().parent.parent / "fixtures"

N_PERIODS = 8
DT_HOURS = 4.0
VMIN, VMAX = 0.95, 1.05

# Forecast feeder totals, MW.
CS1_TOTAL = [2.21, 2.46, 2.33, 2.09, 2.09, 2.21, 2.46, 2.33]
CS2_TOTAL = [3.14, 3.49, 3.32, 2.97, 2.97, 3.14, 3.49, 3.32]

R_E, R_CT = 0.05, 0.02


def z1(self_z, mutual_z):
    """Positive-sequence impedance from average self and mutual terms."""
    return (self_z[0] - mutual_z[0], self_z[1] - mutual_z[1])


def line_record(a, b, r_ohm, x_ohm, amps, z_base, i_base, vmin=VMIN):
    smax = amps / i_base
    return {
        "id": f"{a}-{b}",
        "from": str(a),
        "to": str(b),
        "r": round(r_ohm / z_base, 8),
        "x": round(x_ohm / z_base, 8),
        "i2max": round((smax / vmin) ** 2, 6),
        "smax": round(smax, 6),
    }


def build_lines(segments, configs, kv, s_mva=1.0):
    z_base = kv * kv / s_mva
    i_base = s_mva * 1000.0 / (math.sqrt(3) * kv)
    out = []
    for a, b, feet, cfg in segments:
        if cfg == "switch":
            out.append(line_record(a, b, 0.0001 * z_base, 0.0001 * z_base, 600.0, z_base, i_base))
            continue
        if isinstance(cfg, tuple):
            # Transformer given as (r p.u., x p.u., kVA rating) on its own base.
            r, x, kva = cfg
            scale = s_mva * 1000.0 / kva
            amps = kva / (math.sqrt(3) * kv)
            out.append(line_record(a, b, r * scale * z_base, x * scale * z_base, amps, z_base, i_base))
            continue
        (r, x), amps = configs[cfg]
        miles = feet / 5280.0
        out.append(line_record(a, b, r * miles, x * miles, amps, z_base, i_base))
    return out


def build_loads(base, total_series, crit_fraction):
    p0 = sum(p for p, _ in base.values())
    loads = []
    for bus in sorted(base, key=lambda b: int(b)):
        p, q = base[bus]
        pt = [round(p * tot / p0, 6) for tot in total_series]
        qt = [round(q * tot / p0, 6) for tot in total_series]
        loads.append({
            "bus": str(bus),
            "p_total": pt,
            "p_crit": [round(v * crit_fraction, 6) for v in pt],
            "q_total": qt,
            "q_crit": [round(v * crit_fraction, 6) for v in qt],
        })
    return loads


def feeder(kv, buses, lines, loads, ders):
    return {
        "bases": {"s_mva": 1.0, "v_kv": kv},
        "buses": [{"id": str(b), "vmin": VMIN, "vmax": VMAX} for b in sorted(buses, key=int)],
        "lines": lines,
        "loads": loads,
        "ders": ders,
        "horizon": {"n_periods": N_PERIODS, "dt_hours": DT_HOURS},
    }


def dg(bus, p):
    return {"bus": str(bus), "kind": "DG", "p_cap": p}


def pv(bus, p):
    return {"bus": str(bus), "kind": "PV", "p_cap": p}


def ess(bus, e, s, surplus):
    return {
        "bus": str(bus), "kind": "ESS", "e_cap": e, "s_cap": s,
        "e_surplus": surplus, "r_e": R_E, "r_ct": R_CT,
    }


# IEEE 13-node ------------------------------------------------------------

C13 = {
    601: (z1((0.3418, 1.0335), (0.1558, 0.4367)), 730.0),
    602: (z1((0.7479, 1.1970), (0.1558, 0.4367)), 340.0),
    603: (z1((1.3266, 1.3520), (0.2066, 0.4591)), 230.0),
    604: (z1((1.3266, 1.3520), (0.2066, 0.4591)), 230.0),
    605: ((1.3292, 1.3475), 230.0),
    606: (z1((0.7952, 0.4322), (0.3078, 0.0171)), 329.0),
    607: ((1.3425, 0.5124), 165.0),
}

SEG13 = [
    (650, 632, 2000, 601),
    (632, 633, 500, 602),
    (633, 634, 0, (0.011, 0.02, 500.0)),
    (632, 645, 500, 603),
    (645, 646, 300, 603),
    (632, 671, 2000, 601),
    (671, 680, 1000, 601),
    (671, 684, 300, 604),
    (684, 611, 300, 605),
    (684, 652, 800, 607),
    (671, 692, 0, "switch"),
    (692, 675, 800, 606),
]

LOAD13 = {
    632: (100.0, 58.0),  # half of the distributed 632-671 load
    634: (400.0, 290.0),
    645: (170.0, 125.0),
    646: (230.0, 132.0),
    652: (128.0, 86.0),
    671: (1255.0, 718.0),
    675: (843.0, 462.0),
    692: (170.0, 151.0),
    611: (170.0, 80.0),
}

# IEEE 37-node ------------------------------------------------------------

C37 = {
    721: (z1((0.2926, 0.1973), (0.0673, -0.0368)), 698.0),
    722: (z1((0.4751, 0.2973), (0.1629, -0.0326)), 483.0),
    723: (z1((1.2936, 0.6713), (0.4871, 0.2111)), 230.0),
    724: (z1((2.0952, 0.7758), (0.5204, 0.4231)), 156.0),
}

SEG37 = [
    (799, 701, 1850, 721), (701, 702, 960, 722), (702, 705, 400, 724),
    (702, 713, 360, 723), (702, 703, 1320, 722), (703, 727, 240, 724),
    (703, 730, 600, 723), (704, 714, 80, 724), (704, 720, 800, 723),
    (705, 742, 320, 724), (705, 712, 240, 724), (706, 725, 280, 724),
    (707, 724, 760, 724), (707, 722, 120, 724), (708, 733, 320, 723),
    (708, 732, 320, 724), (709, 731, 600, 723), (709, 708, 320, 723),
    (710, 735, 200, 724), (710, 736, 1280, 724), (711, 741, 400, 723),
    (711, 740, 200, 724), (713, 704, 520, 723), (714, 718, 520, 724),
    (720, 707, 920, 724), (720, 706, 600, 723), (727, 744, 280, 723),
    (730, 709, 200, 723), (733, 734, 560, 723), (734, 737, 640, 723),
    (734, 710, 520, 724), (737, 738, 400, 723), (738, 711, 400, 723),
    (744, 728, 200, 724), (744, 729, 280, 724),
    (709, 775, 0, (0.0045, 0.0081, 500.0)),
]

LOAD37 = {
    701: (630, 315), 712: (85, 40), 713: (85, 40), 714: (38, 18), 718: (85, 40),
    720: (85, 40), 722: (161, 80), 724: (42, 21), 725: (42, 21), 727: (42, 21),
    728: (126, 63), 729: (42, 21), 730: (85, 40), 731: (85, 40), 732: (42, 21),
    733: (85, 40), 734: (42, 21), 735: (85, 40), 736: (42, 21), 737: (140, 70),
    738: (126, 62), 740: (85, 40), 741: (42, 21), 742: (93, 44), 744: (42, 21),
}

# IEEE 123-node -----------------------------------------------------------

_OH3 = z1((0.4615, 1.0650), (0.1558, 0.4367))
_OH2 = z1((0.4576, 1.0780), (0.1535, 0.3849))
C123 = {
    **{c: (_OH3, 530.0) for c in (1, 2, 3, 4, 5, 6)},
    7: (_OH2, 530.0),
    8: (_OH2, 530.0),
    9: ((1.3292, 1.3475), 230.0),
    10: ((1.3292, 1.3475), 230.0),
    11: ((1.3292, 1.3475), 230.0),
    12: (z1((1.5209, 0.7521), (0.5198, 0.2775)), 175.0),
}

SEG123 = [
    (1, 2, 175, 10), (1, 3, 250, 11), (1, 7, 300, 1), (3, 4, 200, 11),
    (3, 5, 325, 11), (5, 6, 250, 11), (7, 8, 200, 1), (8, 12, 225, 10),
    (8, 9, 225, 9), (8, 13, 300, 1), (9, 14, 425, 9), (13, 34, 150, 11),
    (13, 18, 825, 2), (14, 11, 250, 9), (14, 10, 250, 9), (15, 16, 375, 11),
    (15, 17, 350, 11), (18, 19, 250, 9), (18, 21, 300, 2), (19, 20, 325, 9),
    (21, 22, 525, 10), (21, 23, 250, 2), (23, 24, 550, 11), (23, 25, 275, 2),
    (25, 26, 350, 7), (25, 28, 200, 2), (26, 27, 275, 7), (26, 31, 225, 11),
    (27, 33, 500, 9), (28, 29, 300, 2), (29, 30, 350, 2), (30, 250, 200, 2),
    (31, 32, 300, 11), (34, 15, 100, 11), (35, 36, 650, 8), (35, 40, 250, 1),
    (36, 37, 300, 9), (36, 38, 250, 10), (38, 39, 325, 10), (40, 41, 325, 11),
    (40, 42, 250, 1), (42, 43, 500, 10), (42, 44, 200, 1), (44, 45, 200, 9),
    (44, 47, 250, 1), (45, 46, 300, 9), (47, 48, 150, 4), (47, 49, 250, 4),
    (49, 50, 250, 4), (50, 51, 250, 4), (52, 53, 200, 1), (53, 54, 125, 1),
    (54, 55, 275, 1), (54, 57, 350, 3), (55, 56, 275, 1), (57, 58, 250, 10),
    (57, 60, 750, 3), (58, 59, 250, 10), (60, 61, 550, 5), (60, 62, 250, 12),
    (62, 63, 175, 12), (63, 64, 350, 12), (64, 65, 425, 12), (65, 66, 325, 12),
    (67, 68, 200, 9), (67, 72, 275, 3), (67, 97, 250, 3), (68, 69, 275, 9),
    (69, 70, 325, 9), (70, 71, 275, 9), (72, 73, 275, 11), (72, 76, 200, 3),
    (73, 74, 350, 11), (74, 75, 400, 11), (76, 77, 400, 6), (76, 86, 700, 3),
    (77, 78, 100, 6), (78, 79, 225, 6), (78, 80, 475, 6), (80, 81, 475, 6),
    (81, 82, 250, 6), (81, 84, 675, 11), (82, 83, 250, 6), (84, 85, 475, 11),
    (86, 87, 450, 6), (87, 88, 175, 9), (87, 89, 275, 6), (89, 90, 225, 10),
    (89, 91, 225, 6), (91, 92, 300, 11), (91, 93, 225, 6), (93, 94, 275, 9),
    (93, 95, 300, 6), (95, 96, 200, 10), (97, 98, 275, 3), (98, 99, 550, 3),
    (99, 100, 300, 3), (100, 450, 800, 3), (101, 102, 225, 11), (101, 105, 275, 3),
    (102, 103, 325, 11), (103, 104, 700, 11), (105, 106, 225, 10), (105, 108, 325, 3),
    (106, 107, 575, 10), (108, 109, 450, 9), (108, 300, 1000, 3), (109, 110, 300, 9),
    (110, 111, 575, 9), (110, 112, 125, 9), (112, 113, 525, 9), (113, 114, 325, 9),
    (135, 35, 375, 4), (149, 1, 400, 1), (152, 52, 400, 1), (160, 67, 350, 6),
    (197, 101, 250, 3),
    (13, 152, 0, "switch"), (18, 135, 0, "switch"), (60, 160, 0, "switch"),
    (97, 197, 0, "switch"), (61, 610, 0, (0.0127, 0.0272, 150.0)),
]

_L40 = (40, 20)
_L20 = (20, 10)
LOAD123 = {
    1: _L40, 2: _L20, 4: _L40, 5: _L20, 6: _L40, 7: _L20, 9: _L40, 10: _L20,
    11: _L40, 12: _L20, 16: _L40, 17: _L20, 19: _L40, 20: _L40, 22: _L40,
    24: _L40, 28: _L40, 29: _L40, 30: _L40, 31: _L20, 32: _L20, 33: _L40,
    34: _L40, 35: _L40, 37: _L40, 38: _L20, 39: _L20, 41: _L20, 42: _L20,
    43: _L40, 45: _L20, 46: _L20, 47: (105, 75), 48: (210, 150), 49: (140, 95),
    50: _L40, 51: _L20, 52: _L40, 53: _L40, 55: _L20, 56: _L20, 58: _L20,
    59: _L20, 60: _L20, 62: _L40, 63: _L40, 64: (75, 35), 65: (140, 100),
    66: (75, 35), 68: _L20, 69: _L40, 70: _L20, 71: _L40, 73: _L40, 74: _L40,
    75: _L40, 76: (245, 180), 77: _L40, 79: _L40, 80: _L40, 82: _L40, 83: _L20,
    84: _L20, 85: _L40, 86: _L20, 87: _L40, 88: _L40, 90: _L40, 92: _L40,
    94: _L40, 95: _L20, 96: _L20, 98: _L40, 99: _L40, 100: _L40, 102: _L20,
    103: _L40, 104: _L40, 106: _L40, 107: _L40, 109: _L40, 111: _L20, 112: _L20,
    113: _L40, 114: _L20,
}

# Catalog ------------------------------------------------------------------

CATALOG = [
    {"kind": "MDG", "size_index": 1, "p_size": 1.0, "cost": 1000.0},
    {"kind": "MDG", "size_index": 2, "p_size": 1.5, "cost": 1500.0},
    {"kind": "MESS", "size_index": 1, "e_size": 1.5, "s_size": 0.5, "cost": 1000.0, "r_e": R_E, "r_ct": R_CT},
    {"kind": "MESS", "size_index": 2, "e_size": 2.5, "s_size": 1.0, "cost": 1500.0, "r_e": R_E, "r_ct": R_CT},
    {"kind": "MPV", "size_index": 1, "p_size": 0.3, "cost": 1000.0},
    {"kind": "MPV", "size_index": 2, "p_size": 0.4, "cost": 1500.0},
]


def buses_of(segments):
    out = set()
    for a, b, _, _ in segments:
        out.add(a)
        out.add(b)
    return out


def forecast(total, q_ratio, ders, crit=None):
    f = {
        "horizon": {"n_periods": N_PERIODS, "dt_hours": DT_HOURS},
        "p_short_total": total,
        "q_short_total": [round(q_ratio * p, 6) for p in total],
        "ders": ders,
    }
    if crit is not None:
        f["p_short_critical"] = [round(crit * p, 6) for p in total]
        f["q_short_critical"] = [round(crit * q_ratio * p, 6) for p in total]
    return f


def write(rel, obj):
    path = ROOT / rel
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=1) + "\n")


def main():
    write("catalog.json", CATALOG)

    # 13-node: standard loads shaped by the first forecast series.
    shape13 = [sum(p for p, _ in LOAD13.values()) / 1000.0 * t / max(CS1_TOTAL) for t in CS1_TOTAL]
    ders13 = [dg(680, 0.4), pv(675, 0.5), ess(646, 0.4, 0.1, 0.3)]
    lines13 = build_lines(SEG13, C13, 4.16)
    write("ieee13/feeder.json", feeder(4.16, buses_of(SEG13), lines13, build_loads(LOAD13, shape13, 0.6), ders13))
    write("ieee13/scenario.json", {
        "damaged": ["632-645", "632-671", "671-692"],
        "repair_time": {"632-645": 1, "632-671": 2, "671-692": 2},
        "time_unit": "periods",
        "travel": {"seed": 13, "max": 1},
        "n_crews": 1,
    })
    mdg1, mess1 = CATALOG[0], CATALOG[2]
    write("ieee13/mix.json", {
        "entries": [{"spec": mdg1, "count": 1}, {"spec": mess1, "count": 1}],
        "total_cost": mdg1["cost"] + mess1["cost"],
    })

    # CS-I on the 37-node feeder.
    ders1 = [dg(709, 0.2), ess(720, 0.2, 0.05, 0.15), pv(701, 0.5)]
    lines37 = build_lines(SEG37, C37, 4.8)
    write("cs1/feeder.json", feeder(4.8, buses_of(SEG37), lines37, build_loads(LOAD37, CS1_TOTAL, 0.6), ders1))
    damaged1 = ["702-713", "704-720", "703-730", "709-708", "734-737", "702-705"]
    hours1 = [3, 4, 6, 3, 5, 6]
    write("cs1/scenario.json", {
        "damaged": damaged1,
        "repair_time": dict(zip(damaged1, hours1)),
        "time_unit": "hours",
        "travel_rounding": "floor",
        "travel": {"seed": 37, "max": 5},
        "n_crews": 2,
    })
    write("cs1/forecast.json", forecast(CS1_TOTAL, 0.49, ders1))

    # CS-II on the 123-node feeder.
    ders2 = [dg(94, 0.1), dg(52, 0.2), ess(25, 0.3, 0.075, 0.225), pv(18, 2.0), pv(35, 2.0)]
    lines123 = build_lines(SEG123, C123, 4.16)
    write("cs2/feeder.json", feeder(4.16, buses_of(SEG123), lines123, build_loads(LOAD123, CS2_TOTAL, 0.5), ders2))
    damaged2 = ["13-18", "135-35", "13-152", "54-57", "60-160", "67-72", "97-197", "23-25"]
    hours2 = [4, 3, 5, 4, 7, 2, 5, 7]
    write("cs2/scenario.json", {
        "damaged": damaged2,
        "repair_time": dict(zip(damaged2, hours2)),
        "time_unit": "hours",
        "travel_rounding": "floor",
        "travel": {"seed": 123, "max": 5},
        "n_crews": 2,
    })
    write("cs2/forecast.json", forecast(CS2_TOTAL, 0.55, ders2, crit=0.5))


if __name__ == "__main__":
    main()

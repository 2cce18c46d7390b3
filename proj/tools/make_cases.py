#!/usr/bin/env python3
"""Convert MATPOWER-format IEEE test cases into the DC case CSV format.

Requires the `pypower` package (pip install pypower). Only the data needed by
the DC model is kept: bus base injections (net real-power generation minus
load, per unit on the case MVA base) and branch series reactances.

    python3 tools/make_cases.py data/cases
"""
import sys
from pathlib import Path

from pypower.case14 import case14
from pypower.case57 import case57
from pypower.case118 import case118

CASES = {"ieee14": case14, "ieee57": case57, "ieee118": case118}


def convert(name, ppc):
    base = ppc["baseMVA"]
    bus, gen, branch = ppc["bus"], ppc["gen"], ppc["branch"]
    index = {int(b[0]): k + 1 for k, b in enumerate(bus)}
    inj = {k: -b[2] / base for k, b in enumerate(bus, start=1)}
    for g in gen:
        if g[7] > 0:
            inj[index[int(g[0])]] += g[1] / base
    lines = [
        f"# {name}: DC model data converted from the MATPOWER case",
        f"# base MVA {base:g}; injections = (Pg - Pd) / base; reactance = branch x",
    ]
    for k in sorted(inj):
        lines.append(f"BUS,{k},{inj[k] + 0.0:.6g}")
    for br in branch:
        lines.append(f"BRANCH,{index[int(br[0])]},{index[int(br[1])]},{br[3]:.6g}")
    return "\n".join(lines) + "\n"


def main(out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    for name, fn in CASES.items():
        (out / f"{name}.csv").write_text(convert(name, fn()))


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else "data/cases")

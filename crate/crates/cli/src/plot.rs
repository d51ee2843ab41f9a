//! Matplotlib scripts written next to sweep output.

const PRELUDE: &str = r#"#!/usr/bin/env python3
import csv
import sys

import matplotlib.pyplot as plt
import numpy as np

path = sys.argv[1] if len(sys.argv) > 1 else "sweep.csv"
with open(path) as f:
    rows = [r for r in csv.DictReader(f)]
"#;

/// Heat map of S over two axes; blank where unstable or above vacuum.
pub fn heatmap(x: &str, y: &str, y_label: &str) -> String {
    format!(
        r#"{PRELUDE}
xs = sorted({{float(r["{x}"]) for r in rows}})
ys = sorted({{float(r["{y}"]) for r in rows}})
grid = np.full((len(ys), len(xs)), np.nan)
for r in rows:
    if r["S"] == "":
        continue
    s = float(r["S"])
    if s <= 0.5:
        grid[ys.index(float(r["{y}"])), xs.index(float(r["{x}"]))] = s
plt.pcolormesh(xs, ys, grid, shading="auto", cmap="viridis")
plt.colorbar(label="S")
plt.xlabel("ω/ω_b")
plt.ylabel("{y_label}")
plt.tight_layout()
plt.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)
"#
    )
}

/// One S(ω) curve per family member.
pub fn family(column: &str, label: &str) -> String {
    format!(
        r#"{PRELUDE}
members = {{}}
for r in rows:
    if r["S"] == "":
        continue
    members.setdefault(float(r["{column}"]), []).append((float(r["omega_over_omega_b"]), float(r["S"])))
for value, pts in sorted(members.items()):
    pts.sort()
    plt.plot([p[0] for p in pts], [p[1] for p in pts], label="{label} = %g" % value)
plt.axhline(0.5, color="k", lw=0.8, ls="--")
plt.xlabel("ω/ω_b")
plt.ylabel("S")
plt.legend()
plt.tight_layout()
plt.savefig(path.rsplit(".", 1)[0] + ".png", dpi=150)
"#
    )
}

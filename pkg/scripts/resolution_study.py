"""Per-degree D Q(F) and D-flatness residuals against grid size (where the truncation floor sits)."""
import argparse

from dqlab.fedosov import build_fedosov
from dqlab.fields import Grid, trig_samples
from dqlab.geometry import make_structure
import numpy as np

ap = argparse.ArgumentParser()
ap.add_argument("--grids", type=int, nargs="+", default=[24, 32, 48, 64])
ap.add_argument("--eps", type=float, default=0.3)
args = ap.parse_args()

for n in args.grids:
    g = Grid(2, n)
    fd = build_fedosov(make_structure(g, "kahler2d", args.eps), 8)
    F = trig_samples(g, np.random.default_rng(0), 2)
    res = fd.D_apply(fd.Q(F)).residual_by_degree()
    print(n, " ".join(f"{D}:{v:.1e}" for D, v in res.items() if D <= 7))

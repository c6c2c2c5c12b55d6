"""Solve the trace density on the Kahler torus and compare rho_1 with multiples of S."""
import argparse

import numpy as np

from dqlab.fedosov import build_fedosov
from dqlab.fields import Grid
from dqlab.geometry import make_structure
from dqlab.moment import trace_density

ap = argparse.ArgumentParser()
ap.add_argument("--grid", type=int, default=32)
ap.add_argument("--eps", type=float, default=0.3)
args = ap.parse_args()

cs = make_structure(Grid(2, args.grid), "kahler2d", args.eps)
td = trace_density(build_fedosov(cs, 8), 2)
r1 = td[1] - td[1].mean()
S = cs.hermitian_scalar - cs.hermitian_scalar.mean()
c = float(np.sum(r1 * S) / np.sum(S * S))
print(f"solver: {td.diagnostics}")
print(f"best fit rho_1 = {c:.10f} S + const, misfit {np.abs(r1 - c * S).max():.2e}")

"""
Ring, Erdos-Renyi and Newman-Watts networks as N grows
======================================================

Adding nodes adds transverse modes, each one another chance to drift
away.  For random graphs the algebraic connectivity matters too: a
disconnected ER graph has no unique manifold at all.
"""

import numpy as np

from syncprob.bound import pstab_for_network
from syncprob.dynamics import MismatchDistribution, VanDerPol, detect_period
from syncprob.msf import msf_curve
from syncprob.netgen import build_graph, is_connected
from syncprob.spectral import symmetric_eig

model = VanDerPol()
cycle = detect_period(model, [1.0], [1.0, 0.0])
curve = msf_curve(model, cycle, np.concatenate([np.linspace(0, 15, 61), np.arange(16, 82, 3.0)]), steps_per_period=100)
dist = MismatchDistribution.vanderpol(5e-4, 0.1, 1.2e-3)

models = {
    "ring": {"model": "ring", "k": 10},
    "er": {"model": "er", "p": 0.1},
    "nw": {"model": "nw", "k": 6, "p": 0.4167},
}

print("   N   " + "  ".join(f"{name:>14}" for name in models))
for n in range(20, 101, 20):
    cells = []
    for tag in models.values():
        vals, mu2 = [], []
        for seed in range(5):
            g = build_graph({**tag, "n": n, "seed": seed} if tag["model"] != "ring" else {**tag, "n": n})
            r = pstab_for_network(g, None, curve, dist, cycle, 0.4, on_disconnected="zero")
            vals.append(r.pstab_lb)
            mu2.append(symmetric_eig(g.laplacian()).eigenvalues[1] if is_connected(g) else 0.0)
        cells.append(f"{np.mean(vals):5.2f} (mu2 {np.mean(mu2):4.1f})")
    print(f"{n:4d}   " + "  ".join(cells))

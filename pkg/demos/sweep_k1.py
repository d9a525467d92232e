"""Single-peak sweep on the k1 well: measured peak height lambda against the
leading-order prediction as epsilon shrinks.

    python demos/sweep_k1.py [eps ...]
"""
import sys

import numpy as np

from peakforge.cli import loglog_slope
from peakforge.potentials import preset_k1
from peakforge.reduction import solve_sweep

S = 0.2


def main(eps_list):
    pairs = solve_sweep(eps_list, preset_k1(), [[0.0]], S)
    good = []
    print(f"{'eps':>6} {'lambda':>10} {'predicted':>10} {'ratio':>7} {'|phi|*':>8}")
    for eps, sol in pairs:
        if isinstance(sol, Exception):
            print(f"{eps:6.3f}  failed: {sol}")
            continue
        lam, pred = sol.cfg.lambdas[0], np.ravel(sol.predicted_lambda)[0]
        good.append((eps, lam))
        print(f"{eps:6.3f} {lam:10.4f} {pred:10.4f} {lam / pred:7.3f} {sol.state.phi_star:8.4f}")
    if len(good) >= 2:
        e, l = zip(*good)
        print(f"fitted slope {loglog_slope(e, l):.3f}, leading order {-1 / (2 * S):.3f}")


if __name__ == "__main__":
    main([float(a) for a in sys.argv[1:]] or [0.4, 0.2, 0.1])

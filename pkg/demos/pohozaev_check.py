"""Local Pohozaev identities: exact bubble (closed-form extension) and a
computed k1 solution (spectral extension).

    python demos/pohozaev_check.py
"""
from peakforge.bubbles import BubbleParams, bubble_source, dlambda_source
from peakforge.field_ops import FracOrder
from peakforge.pohozaev import PohozaevContext, dilation_identity, pick_rho, translation_identity
from peakforge.potentials import preset_k1
from peakforge.reduction import SolverOptions, solve_peaks

S = 0.2


def show(label, rep):
    print(f"{label:<28} rho={rep.rho:6.3f}  residual/scale={rep.relative_residual:.2e}")


def main():
    bp = BubbleParams(1.0, (0.0,), FracOrder(1, S))
    u, w = bubble_source(bp), dlambda_source(bp)
    ctx = PohozaevContext(S)
    for rho in (1.0, 3.0):
        show("bubble dilation", dilation_identity(u, None, (0.0,), rho, ctx))
        show("bubble dilation, linearized", dilation_identity(u, w, (0.0,), rho, ctx))
        show("bubble translation", translation_identity(u, None, (0.0,), rho, 0, ctx))

    eps, V = 0.4, preset_k1()
    sol = solve_peaks(eps, V, [[0.0]], S, SolverOptions())
    xi = tuple(sol.cfg.centers[0])
    rho = pick_rho(xi, 2.0, sol.u, None, S)
    ctx = PohozaevContext(S, eps, V)
    print(f"k1 solution at eps={eps}: lambda={sol.cfg.lambdas[0]:.4f}")
    show("solution dilation", dilation_identity(sol.u, None, xi, rho, ctx))
    show("solution translation", translation_identity(sol.u, None, xi, rho, 0, ctx))


if __name__ == "__main__":
    main()

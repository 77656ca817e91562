"""Fit concept boxes to conditional-probability axioms and query instances.

Concepts embed as axis-aligned boxes; P(D | C) is the fraction of C's
volume inside D. Fitting runs gradient descent (softened box edges keep
the objective differentiable) until the asserted conditionals hold, after
which *any* concept pair has a calibrated conditional — including pairs no
axiom mentioned.
"""

from pathlib import Path

from probkg import cond_prob, fit, instance_prob
from probkg.boxes import parse_axioms

AXIOMS = Path(__file__).parent / "data" / "tools.axioms"


def main():
    axioms = parse_axioms(AXIOMS.read_text())
    space, trace = fit(axioms, dim=2, iters=3000, seed=4)
    print(f"fitted {len(space.boxes)} concepts in {space.dim}d; "
          f"loss {trace[0]:.4f} -> {trace[-1]:.6f}")

    print("\nasserted vs fitted:")
    for ax in axioms:
        got = cond_prob(space, ax.c, ax.d)
        print(f"  P({ax.d} | {ax.c}) = {got:.4f}   (asserted {ax.p})")

    # g07812 is asserted to be an AngleGrinder (and thus a PowerTool);
    # the most specific concept it belongs to decides the conditioning box
    abox = [("g07812", "AngleGrinder"), ("g07812", "PowerTool")]
    p = instance_prob(space, abox, "g07812", "HasFault")
    print(f"\nP(HasFault | g07812) = {p:.4f}")

    # an unmentioned pair still gets an answer out of the geometry
    print(f"P(PowerTool | HasFault) = {cond_prob(space, 'HasFault', 'PowerTool'):.4f}")


if __name__ == "__main__":
    main()

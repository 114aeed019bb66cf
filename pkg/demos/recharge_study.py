"""How much faster does a dim node refill when neighbors share light?

Sweeps the dim node's ambient level and measures the time it takes to
accumulate one joule of harvest, with the two bright neighbors either
dark or running autonomous share sessions.  The gain shrinks as the
room gets brighter: the bursts are a fixed income, the ambient is not.
"""

from luxnet.experiments import recharge_improvement, render_recharge_table


def main():
    points = recharge_improvement(ambient_levels=(150.0, 250.0, 400.0))
    print(render_recharge_table(points), end="")
    best = points[0]
    print()
    print(f"at {best.ambient_lux:.0f} lx the shared runs reach the joule "
          f"{best.time_without_s - best.time_with_s:.0f} s sooner "
          f"({best.improvement * 100:.1f}% of the bare time)")


if __name__ == "__main__":
    main()

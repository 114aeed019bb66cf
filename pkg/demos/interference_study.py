"""Frame losses under a share burst, as a function of ambient light.

While an energy burst is on the air the receiver's front end sits in
its glare; how often a frame survives depends on how much ambient
light anchors the input stage.  Sweeps the ambient level and draws a
thousand frames per point.
"""

from scipy.stats import spearmanr

from luxnet.experiments import interference_sweep, render_sweep_table


def main():
    points = interference_sweep()
    print(render_sweep_table(points), end="")
    rho, _ = spearmanr([p.ambient_lux for p in points],
                       [p.failure_ratio for p in points])
    print()
    print(f"failure ratio vs ambient light: Spearman {rho:.3f} "
          f"(brighter rooms shrug the burst off)")


if __name__ == "__main__":
    main()

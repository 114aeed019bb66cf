"""Size the schedule and the storage for a sharing deployment.

Three planning questions, answered with the library calculators: how
much sleep is left once a node serves n share sessions per interval,
what request period every emitter can keep up with, and how much
capacitance rides out the worst session without sagging below the
retention floor.
"""

from luxnet.controller import duty_cycle, select_t_data_req, standby_time
from luxnet.energy import min_capacitance
from luxnet.node import DEFAULT_TIMING


def main():
    print("sessions  duty_ratio  standby_s")
    for n in range(0, 9):
        duty = duty_cycle(DEFAULT_TIMING, n)
        if duty.feasible:
            print(f"{n:>8} {duty.ratio:>11.4f} {standby_time(DEFAULT_TIMING, n):>10.2f}")
        else:
            print(f"{n:>8} {duty.ratio:>11.4f} {'(does not fit)':>14}")
    print()

    period = select_t_data_req([DEFAULT_TIMING] * 3)
    print(f"request period every node sustains: {period:.0f} s "
          f"(recovery bound {DEFAULT_TIMING.t_energy_net_rec:.0f} s, "
          f"standby bound {DEFAULT_TIMING.t_standby:.2f} s)")
    print(f"the schedule used by the shipped scenarios, 600 s, "
          f"fits the same window: "
          f"{select_t_data_req([DEFAULT_TIMING] * 3, preferred=600.0):.0f} s")
    print()

    farads = min_capacitance(e_peak=2.0, eta_pmic_l=0.85, p_leak=10e-6,
                             t_peak=40.0, v_max=4.5, v_min=3.2)
    print(f"storage for a 2 J peak over 40 s at 85% converter "
          f"efficiency: {farads:.4f} F (shipped nodes carry 0.4 F and a "
          f"3.3 V guard floor instead)")


if __name__ == "__main__":
    main()

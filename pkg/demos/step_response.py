"""Relocking after sudden field jumps.

The true Larmor frequency jumps by 500 Hz half a millisecond into the shot
and jumps back at 1.2 ms.  A filter that assumes a diffusing (random-walk)
frequency keeps enough gain to reacquire the new value within about 0.1 ms,
at the price of a noisier steady-state estimate.  Run with

    python3 demos/step_response.py
"""

import math

from spinfid import ExperimentConfig, SpmParams, Step, Wiener, run_tracking

TWO_PI = 2.0 * math.pi


def main() -> None:
    omega_bar = TWO_PI * 9.4e3
    jump = TWO_PI * 500.0
    p = SpmParams(omega_bar=omega_bar, Delta=1e-6)
    signal = Step(omega_bar, ((0.5e-3, omega_bar + jump),
                              (1.2e-3, omega_bar)))
    cfg = ExperimentConfig(
        params=p,
        true_signal=signal,
        assumed_signal=Wiener(omega_bar, 1e8),
        duration=2e-3,
        substeps=1,
        seed=0,
    )
    result = run_tracking(cfg)

    print(f"jumps: +500 Hz at 0.5 ms, -500 Hz at 1.2 ms "
          f"(nominal {omega_bar / TWO_PI:.0f} Hz)")
    print()
    print("   t [ms]     true [Hz]   estimate [Hz]   error [Hz]")
    for t_ms in (0.4, 0.5, 0.52, 0.55, 0.6, 1.0, 1.2, 1.22, 1.25, 1.3, 2.0):
        k = int(round(t_ms * 1e-3 / p.Delta)) - 1
        true_hz = result.truth_omega[k] / TWO_PI
        est_hz = result.trace.omega_hat[k] / TWO_PI
        print(f"   {t_ms:6.2f} {true_hz:13.1f} {est_hz:15.1f} "
              f"{est_hz - true_hz:12.2f}")

    for t_jump, label in ((0.5e-3, "first"), (1.2e-3, "second")):
        k = int(round((t_jump + 1e-4) / p.Delta)) - 1
        frac = abs(result.true_error[k]) / jump
        print(f"\n{label} jump: residual 0.1 ms later = {frac:.1%} "
              f"of the jump size")


if __name__ == "__main__":
    main()

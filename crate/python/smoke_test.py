"""Smoke test for the `ionsep` extension module.

Build and install first:  maturin develop -m crates/python/Cargo.toml --release
"""

import math

import ionsep


def main():
    sep = ionsep.Separation(3.2e-6)
    d0, df = sep.separations
    assert math.isclose(df / d0, 10.0, rel_tol=1e-12)

    # the harmonic objective never drops below the final-trap ground energy
    ground = sep.ground_quanta
    assert sep.objective_value([0.0, 0.0, 0.0], mode="harmonic") > ground

    run = sep.optimize("NM", mode="harmonic", budget=3000)
    assert run.value >= ground * (1 - 1e-12)
    assert (run.value - ground) / ground < 1e-3
    print(f"NM harmonic optimum {run.free} at {run.value:.6f} hbar*omega0 (ground {ground:.6f})")

    exc = sep.verify(run.free)
    assert exc.e_exc_quanta > 0 and exc.beta_max > 0
    print(f"verified E_exc = {exc.e_exc_quanta:.4f} hbar*omega0")

    t, alpha, beta, d = sep.controls(run.free, n_samples=101)
    assert len(t) == len(alpha) == len(beta) == len(d) == 101
    assert math.isclose(d[0], d0, rel_tol=1e-9) and math.isclose(d[-1], df, rel_tol=1e-9)

    quiet = sep.noise(run.free, 0.0, n_draws=3, seed=1)
    assert all(s == quiet.nominal_quanta for s in quiet.samples_quanta)
    noisy = sep.noise(run.free, 0.004, n_draws=10, seed=1)
    assert noisy.n_failed + sum(s is not None for s in noisy.samples_quanta) == 10

    centroid, direction, rms = ionsep.fit_line([[0, 0, 0], [1, 2, 3], [2, 4, 6]])
    assert rms < 1e-12 and math.isclose(sum(v * v for v in direction), 1.0)

    try:
        sep.optimize("XX")
    except ValueError:
        pass
    else:
        raise AssertionError("unknown method accepted")
    print("smoke test passed")


if __name__ == "__main__":
    main()

"""Smoke test for the blup extension module: build it, then run this file."""

import math

import blup


def close(a, b, tol):
    assert abs(a - b) <= tol, f"{a} vs {b}"


def main():
    ou = blup.Kernel.exponential(2.0)
    const = blup.Trend("const1")

    cont = blup.ContinuousModel(ou, const, 0.0, 1.0).blup(2.0)
    close(cont.rmse, 1.164262, 5e-7)
    assert cont.path in ("ClosedForm", "Operator")
    close(sum(w for t, i, w in cont.discretize() if i == 0), 1.0, 1e-8)

    design = blup.Design.values([0.0, 0.25, 0.5, 0.75, 1.0])
    sol = blup.DiscreteModel(ou, const, design).predict([2.0])
    close(sum(sol.weights), 1.0, 1e-10)
    assert sol.rmse >= cont.rmse
    close(sol.predict([3.0] * 5), 3.0, 1e-10)

    exact = blup.DiscreteModel(ou, const, design).predict([0.5])
    assert exact.interpolated and exact.mse == 0.0

    matern = blup.Kernel.matern32(2.0)
    grid = blup.DiscreteModel(matern, const, blup.Design.family("xi_N_N", 4))
    close(grid.predict([2.0]).rmse, 0.9985675343, 1e-9)

    product = blup.ProductModel(matern)
    close(product.blup(2.0, 2.0).rmse, 1.119510, 5e-7)
    t1, t2, rmse = product.mse_grid(resolution=5)
    assert len(rmse) == len(t1) * len(t2) == 25
    assert all(r >= 0.0 and math.isfinite(r) for r in rmse)

    table = blup.reproduce_table(4)
    assert table.passed, table.failures()

    try:
        blup.Kernel.matern32(-1.0)
    except blup.BlupError:
        pass
    else:
        raise AssertionError("negative rate accepted")

    print(f"blup {blup.__version__} smoke test passed")


if __name__ == "__main__":
    main()

import numpy as np
from dotenv import load_dotenv

from qc_semilinear.geometry import DiskGrid, unit_disk
from qc_semilinear.logging import Logger
from qc_semilinear.oracles import radial_shoot, radial_stretch_reference
from qc_semilinear.potential import BoundaryData, ScalarField
from qc_semilinear.semilinear import (
    ContinuationOptions,
    detect_dead_core,
    make_constant,
    make_exponential,
    make_power,
    solve_quasilinear_disk,
    solve_semilinear,
)

logger = Logger()


def main():

    load_dotenv()

    grid = DiskGrid(64, 128)
    ones = ScalarField(grid, np.ones(grid.shape))

    # Example problems on the disk: (name, h, boundary data, nonlinearity, options)
    problems = [
        ("plasma core", ones, BoundaryData(np.ones(256)), make_power(0.5), ContinuationOptions()),
        (
            "dead core",
            ones,
            BoundaryData(np.ones(256)),
            make_power(0.5, scale=200.0),
            ContinuationOptions(method="newton", tau_steps=20),
        ),
        (
            "combustion",
            ones,
            BoundaryData(np.zeros(256)),
            make_exponential(0.1),
            ContinuationOptions(),
        ),
    ]

    # Solve each problem and compare with the radial shooting reference
    for name, h, phi, f, opts in problems:
        print(f"\nSolving: {name} ({f.name})")
        U, report = solve_quasilinear_disk(h, phi, f, opts)
        profile = radial_shoot(f, 1.0, phi.values[0])
        error = np.max(np.abs(U.values - profile(np.abs(grid.points))))
        print(f"Max deviation from the radial profile: {error:.2e}")
        core = detect_dead_core(U)
        if core.components:
            print(f"Dead core radius {core.radius:.4f} (shooting: {profile.core_radius:.4f})")

    # A radial stretch coefficient field, solved through its quasiconformal map
    print("\nSolving: radial stretch K=2, f=0, boundary data cos(s)")
    ref = radial_stretch_reference(2.0)
    phi = BoundaryData.from_function(np.cos, 256, on_circle=False)
    u, report = solve_semilinear(
        unit_disk(), ref.matrix(), phi, make_constant(0.0), qc_map=ref.qc_map(128)
    )
    logger.log(f"Weak residual: {report.weak_residual:.3e}", "green")


if __name__ == "__main__":
    main()

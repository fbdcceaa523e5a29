//! Minimal end-to-end run: one PIMS trajectory on a synthetic objective.

use gpbo::*;

fn main() -> Result<()> {
    let kernel = KernelSpec::rbf(0.2)?;
    let grid = FiniteGrid::lattice(2, 15, 1.0)?;
    let objective = gen_objective(&kernel, &grid, &mut derive_rng(7, &[0]))?;
    let settings = RunSettings {
        horizon: 50,
        master_seed: 7,
        ..Default::default()
    };
    let trace = run_bo(&objective, &kernel, Policy::Pims, &settings)?;
    let regret = regret_series(&trace, &objective)?;
    println!("final simple regret: {}", regret.simple.last().unwrap());
    Ok(())
}

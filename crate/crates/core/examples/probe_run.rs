use filcomb::kinetics::Kinetics;
use filcomb::macroscale::{run, MacroProblem, RunOptions};
use filcomb::mesh::{build_cell_mesh, build_macro_mesh};
use filcomb::microcell::{CellMaterials, CellProblem};
use filcomb::tensors::{EffectiveScalars, TensorTable};
use std::time::Instant;

fn main() {
    let t0 = Instant::now();
    let cell = build_cell_mesh(0.4, 64, 0.05).unwrap();
    let materials = CellMaterials::default();
    let scalars = EffectiveScalars::from_cell(&cell, &materials).unwrap();
    let problem = CellProblem::new(cell, materials).unwrap();
    println!("cell dofs: chi={} omega={}", problem.n_chi_dofs(), problem.n_omega_dofs());

    let grid = |a: f64, b: f64, n: usize| -> Vec<f64> {
        (0..n).map(|k| a + (b - a) * k as f64 / (n - 1) as f64).collect()
    };
    for q in [0.1f64, 1.0, 2.5, 25.0] {
        let kin = Kinetics::new(5.0, 2.5, q).unwrap();
        let tt = Instant::now();
        let table = TensorTable::build(grid(0.0, 5.5, 33), grid(0.0, 1.2, 33), &problem, &kin).unwrap();
        let t_build = tt.elapsed().as_secs_f64();
        let l = table.eval(5.0, 0.05).lambda.xx;
        let l2 = table.eval(1.7, 0.1).lambda.xx;
        let mesh = build_macro_mesh(5.0, 2.5, 100, 50).unwrap();
        let mp = MacroProblem::new(mesh, scalars, 0.01, 5.0, 0.05).unwrap();
        let tr = Instant::now();
        let outcome = run(&mp, 1.7, 0.1, &table, RunOptions { t_end: 40.0, snapshot_interval: None });
        let t_run = tr.elapsed().as_secs_f64();
        assert!(outcome.error.is_none(), "{:?}", outcome.error);
        let r = outcome.result;
        // find time reaching 4.9
        let hit = r.times.iter().zip(&r.u_avg).find(|(_, &ua)| ua >= 4.9).map(|(t, _)| *t);
        println!("Q={q}: table {t_build:.1}s l(5,.05)={l:.3e} l(1.7,.1)={l2:.3e} run40 {t_run:.1}s u_avg(40)={:.4} hit4.9 at {:?} mpexc={:.2e}",
            r.u_avg.last().unwrap(), hit, r.max_principle_excess);
    }
    println!("total {:.1}s", t0.elapsed().as_secs_f64());
}

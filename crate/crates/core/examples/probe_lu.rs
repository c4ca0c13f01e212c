use filcomb::kinetics::Kinetics;
use filcomb::mesh::build_cell_mesh;
use filcomb::microcell::{CellMaterials, CellProblem};
use std::time::Instant;

fn main() {
    let cell = build_cell_mesh(0.4, 64, 0.05).unwrap();
    let problem = CellProblem::new(cell, CellMaterials::default()).unwrap();
    let kin = Kinetics::new(5.0, 2.5, 2.5).unwrap();
    // warm
    problem.solve(3.0, 0.5, &kin).unwrap();
    let t = Instant::now();
    let n = 20;
    for k in 0..n {
        let s = 0.5 + 4.5 * k as f64 / n as f64;
        problem.solve(s, 0.3, &kin).unwrap();
    }
    println!("coupled solve avg {:.1} ms", t.elapsed().as_secs_f64() * 1000.0 / n as f64);
    let t = Instant::now();
    for _ in 0..n {
        problem.solve(-1.0, 0.3, &kin).unwrap();
    }
    println!("decoupled solve avg {:.1} ms", t.elapsed().as_secs_f64() * 1000.0 / n as f64);
}

use filcomb::fem::{assemble_stiffness, lumped_mass_vector, DofMap, Tensor2};
use filcomb::mesh::{build_cell_mesh, Region};
use filcomb::sparse::{SparseLu, Triplets};
use std::time::Instant;

fn main() {
    let cell = build_cell_mesh(0.4, 64, 0.05).unwrap();
    let map = DofMap::periodic(cell.mesh.n_nodes(), &cell.periodic_pairs, None);
    let coeff: Vec<Tensor2> = cell.region.iter().map(|r| Tensor2::isotropic(match r {
        Region::Gas => 2.38e-4, Region::Solid => 7e-4 })).collect();
    let k = assemble_stiffness(&cell.mesh, &coeff, None, &map).unwrap();
    let w = lumped_mass_vector(&cell.mesh, None, &map);
    let n = map.n_dofs();
    let mut t = Triplets::new(n + 1, n + 1);
    k.push_scaled_into(&mut t, 0, 0, 1.0);
    for (j, &wj) in w.iter().enumerate() {
        t.push(n, j, wj);
        t.push(j, n, wj);
    }
    let a = t.to_csr();
    println!("n = {}, nnz = {}", a.n_rows(), a.nnz());
    let tm = Instant::now();
    let reps = 50;
    let mut lu = None;
    for _ in 0..reps { lu = Some(SparseLu::factorize(&a).unwrap()); }
    println!("factorize avg {:.2} ms", tm.elapsed().as_secs_f64() * 1000.0 / reps as f64);
    let lu = lu.unwrap();
    println!("factor nnz = {} (input {})", lu.factor_nnz(), a.nnz());
    let b = vec![1.0; n + 1];
    let tm = Instant::now();
    for _ in 0..reps { let _ = lu.solve(&b); }
    println!("triangular solve avg {:.3} ms", tm.elapsed().as_secs_f64() * 1000.0 / reps as f64);
    let tm = Instant::now();
    for _ in 0..reps {
        let mut t2 = Triplets::new(n + 1, n + 1);
        k.push_scaled_into(&mut t2, 0, 0, 1.0);
        let _ = t2.to_csr();
    }
    println!("push+to_csr avg {:.2} ms", tm.elapsed().as_secs_f64() * 1000.0 / reps as f64);
}
// appended fill probe

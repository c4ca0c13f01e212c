//! Effective tensors and their (u, v)-table cache.
//!
//! From a cell solution at state (s, r) the homogenized conductivity and
//! diffusivity are
//!
//!   λ_ij = ∫_Y λ(y)(e_i + ∇χ_i)·(e_j + ∇χ_j) dy
//!        + Q f(s) ∫_Γ [ r χ_iχ_j + s²/(2u_a)(ω_jχ_i + ω_iχ_j) ] dσ,
//!   𝒟_ij = ∫_{Y_g} D(e_i + ∇ω_i)·(e_j + ∇ω_j) dy
//!        − f(s) ∫_Γ [ s²/u_a · ω_iω_j + r/2 (ω_iχ_j + ω_jχ_i) ] dσ,
//!
//! with the surface terms evaluated by the same 1D P1 quadrature as the
//! interface mass matrix and only when the solve ran with the reaction
//! coupling active. Fields enter in the zero-χ-mean gauge that the cell
//! solver pins; the constant-shift freedom of the cell problem does not leak
//! into the reported tensors because the gauge is fixed, not because the
//! surface expressions are shift-invariant.

use crate::error::{Error, Result};
use crate::fem::Tensor2;
use crate::kinetics::{arrhenius_f, Kinetics};
use crate::mesh::{CellMesh, Region};
use crate::microcell::{CellMaterials, CellProblem, CellSolution};
use std::sync::atomic::{AtomicU64, Ordering};

/// Effective 2×2 tensors at one state.
#[derive(Debug, Clone, Copy)]
pub struct EffectiveTensors {
    pub lambda: Tensor2,
    pub d: Tensor2,
    pub s: f64,
    pub r: f64,
}

/// Porosity θ and effective volumetric heat capacity c.
#[derive(Debug, Clone, Copy)]
pub struct EffectiveScalars {
    pub theta: f64,
    pub c: f64,
}

impl EffectiveScalars {
    pub fn from_cell(cell: &CellMesh, materials: &CellMaterials) -> Result<EffectiveScalars> {
        let theta = porosity(cell);
        let c = heat_capacity(cell, materials.c_g, materials.c_s)?;
        if !(theta > 0.0 && theta <= 1.0) {
            return Err(Error::invalid(format!("porosity {theta} outside (0, 1]")));
        }
        Ok(EffectiveScalars { theta, c })
    }
}

/// θ = |Y_g| / |Y| with |Y| = 1.
pub fn porosity(cell: &CellMesh) -> f64 {
    cell.gas_area()
}

/// c = ∫_{Y_g} c_g dy + ∫_{Y_s} c_s dy.
pub fn heat_capacity(cell: &CellMesh, c_g: f64, c_s: f64) -> Result<f64> {
    if !(c_g > 0.0) || !(c_s > 0.0) {
        return Err(Error::invalid(format!(
            "heat capacities must be positive, got ({c_g}, {c_s})"
        )));
    }
    Ok(cell.gas_area() * c_g + cell.solid_area() * c_s)
}

/// ∫_Γ u w dσ by exact P1 line quadrature over the interface edges.
fn gamma_inner(cell: &CellMesh, u: &[f64], w: &[f64]) -> f64 {
    let mut total = 0.0;
    for &[a, b] in &cell.interface_edges {
        let (pa, pb) = (cell.mesh.nodes[a], cell.mesh.nodes[b]);
        let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
        total += len / 6.0 * (2.0 * u[a] * w[a] + u[a] * w[b] + u[b] * w[a] + 2.0 * u[b] * w[b]);
    }
    total
}

/// Per-element constant gradient of a nodal field.
fn element_gradient(cell: &CellMesh, t: usize, field: &[f64]) -> [f64; 2] {
    let tri = cell.mesh.triangles[t];
    let p = tri.map(|i| cell.mesh.nodes[i]);
    let two_a =
        (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let grads = [
        [(p[1][1] - p[2][1]) / two_a, (p[2][0] - p[1][0]) / two_a],
        [(p[2][1] - p[0][1]) / two_a, (p[0][0] - p[2][0]) / two_a],
        [(p[0][1] - p[1][1]) / two_a, (p[1][0] - p[0][0]) / two_a],
    ];
    let mut g = [0.0, 0.0];
    for a in 0..3 {
        g[0] += field[tri[a]] * grads[a][0];
        g[1] += field[tri[a]] * grads[a][1];
    }
    g
}

fn check_state(sol: &CellSolution, s: f64, r: f64) -> Result<()> {
    if sol.s != s || sol.r != r {
        return Err(Error::invalid(format!(
            "cell solution was computed at ({}, {}), tensors requested at ({s}, {r})",
            sol.s, sol.r
        )));
    }
    Ok(())
}

/// Effective conductivity λ(s, r) from a cell solution at that state.
pub fn effective_lambda(
    sol: &CellSolution,
    s: f64,
    r: f64,
    cell: &CellMesh,
    materials: &CellMaterials,
    kin: &Kinetics,
) -> Result<Tensor2> {
    check_state(sol, s, r)?;
    let mut entries = [[0.0f64; 2]; 2];
    for t in 0..cell.mesh.n_triangles() {
        let coeff = match cell.region[t] {
            Region::Gas => materials.lambda_g,
            Region::Solid => materials.lambda_s,
        };
        let area = cell.mesh.triangle_area(t);
        let g = [
            element_gradient(cell, t, &sol.chi[0]),
            element_gradient(cell, t, &sol.chi[1]),
        ];
        let e = [[1.0 + g[0][0], g[0][1]], [g[1][0], 1.0 + g[1][1]]];
        for i in 0..2 {
            for j in i..2 {
                entries[i][j] += coeff * area * (e[i][0] * e[j][0] + e[i][1] * e[j][1]);
            }
        }
    }
    if sol.coupled {
        let qf = kin.q * arrhenius_f(s, kin);
        let kappa = s * s / kin.u_a;
        for i in 0..2 {
            for j in i..2 {
                let cc = gamma_inner(cell, &sol.chi[i], &sol.chi[j]);
                let oc = gamma_inner(cell, &sol.omega[j], &sol.chi[i])
                    + gamma_inner(cell, &sol.omega[i], &sol.chi[j]);
                entries[i][j] += qf * (r * cc + 0.5 * kappa * oc);
            }
        }
    }
    Ok(Tensor2 {
        xx: entries[0][0],
        xy: entries[0][1],
        yy: entries[1][1],
    })
}

/// Effective diffusivity 𝒟(s, r) from a cell solution at that state.
pub fn effective_d(
    sol: &CellSolution,
    s: f64,
    r: f64,
    cell: &CellMesh,
    materials: &CellMaterials,
    kin: &Kinetics,
) -> Result<Tensor2> {
    check_state(sol, s, r)?;
    let mut entries = [[0.0f64; 2]; 2];
    for t in 0..cell.mesh.n_triangles() {
        if cell.region[t] != Region::Gas {
            continue;
        }
        let area = cell.mesh.triangle_area(t);
        let g = [
            element_gradient(cell, t, &sol.omega[0]),
            element_gradient(cell, t, &sol.omega[1]),
        ];
        let e = [[1.0 + g[0][0], g[0][1]], [g[1][0], 1.0 + g[1][1]]];
        for i in 0..2 {
            for j in i..2 {
                entries[i][j] += materials.d * area * (e[i][0] * e[j][0] + e[i][1] * e[j][1]);
            }
        }
    }
    if sol.coupled {
        let f = arrhenius_f(s, kin);
        let kappa = s * s / kin.u_a;
        for i in 0..2 {
            for j in i..2 {
                let oo = gamma_inner(cell, &sol.omega[i], &sol.omega[j]);
                let oc = gamma_inner(cell, &sol.omega[i], &sol.chi[j])
                    + gamma_inner(cell, &sol.omega[j], &sol.chi[i]);
                entries[i][j] -= f * (kappa * oo + 0.5 * r * oc);
            }
        }
    }
    Ok(Tensor2 {
        xx: entries[0][0],
        xy: entries[0][1],
        yy: entries[1][1],
    })
}

/// Both tensors at the solution's own state.
pub fn effective_tensors(
    sol: &CellSolution,
    cell: &CellMesh,
    materials: &CellMaterials,
    kin: &Kinetics,
) -> Result<EffectiveTensors> {
    Ok(EffectiveTensors {
        lambda: effective_lambda(sol, sol.s, sol.r, cell, materials, kin)?,
        d: effective_d(sol, sol.s, sol.r, cell, materials, kin)?,
        s: sol.s,
        r: sol.r,
    })
}

/// Rectangular (u, v) cache of effective tensors with bilinear interpolation
/// and clamping outside the covered range (extrapolation could destroy
/// positive definiteness mid-run). Queries past the range bump a counter.
pub struct TensorTable {
    u_grid: Vec<f64>,
    v_grid: Vec<f64>,
    /// Row-major: entry(iu, iv) at iu · v_grid.len() + iv.
    entries: Vec<EffectiveTensors>,
    clamped: AtomicU64,
}

fn check_grid(name: &str, grid: &[f64]) -> Result<()> {
    if grid.len() < 2 {
        return Err(Error::invalid(format!("{name} grid needs at least 2 points")));
    }
    if grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::invalid(format!("{name} grid must be strictly ascending")));
    }
    Ok(())
}

impl TensorTable {
    /// One cell solve and tensor assembly per grid point, parallelized over
    /// points. Every entry is validated for positive definiteness.
    pub fn build(
        u_grid: Vec<f64>,
        v_grid: Vec<f64>,
        problem: &CellProblem,
        kin: &Kinetics,
    ) -> Result<TensorTable> {
        use rayon::prelude::*;
        check_grid("u", &u_grid)?;
        check_grid("v", &v_grid)?;

        let states: Vec<(f64, f64)> = u_grid
            .iter()
            .flat_map(|&u| v_grid.iter().map(move |&v| (u, v)))
            .collect();
        let entries: Vec<Result<EffectiveTensors>> = states
            .par_iter()
            .map(|&(u, v)| {
                let sol = problem.solve(u, v, kin).map_err(|e| Error::TableBuild {
                    u,
                    v,
                    message: e.to_string(),
                })?;
                let tensors = effective_tensors(&sol, &problem.cell, &problem.materials, kin)?;
                for (name, t) in [("lambda", &tensors.lambda), ("D", &tensors.d)] {
                    if !t.is_positive_definite() {
                        return Err(Error::TableBuild {
                            u,
                            v,
                            message: format!(
                                "effective {name} is not positive definite (eigenvalues {:?})",
                                t.eigenvalues()
                            ),
                        });
                    }
                }
                Ok(tensors)
            })
            .collect();
        let entries = entries.into_iter().collect::<Result<Vec<_>>>()?;
        Ok(TensorTable {
            u_grid,
            v_grid,
            entries,
            clamped: AtomicU64::new(0),
        })
    }

    pub fn u_grid(&self) -> &[f64] {
        &self.u_grid
    }

    pub fn v_grid(&self) -> &[f64] {
        &self.v_grid
    }

    pub fn entry(&self, iu: usize, iv: usize) -> &EffectiveTensors {
        &self.entries[iu * self.v_grid.len() + iv]
    }

    pub fn n_entries(&self) -> usize {
        self.entries.len()
    }

    /// How many queries landed outside the grid and were clamped.
    pub fn clamp_count(&self) -> u64 {
        self.clamped.load(Ordering::Relaxed)
    }

    fn locate(grid: &[f64], x: f64) -> (usize, f64) {
        let n = grid.len();
        if x <= grid[0] {
            return (0, 0.0);
        }
        if x >= grid[n - 1] {
            return (n - 2, 1.0);
        }
        let mut lo = 0;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if grid[mid] <= x {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        (lo, (x - grid[lo]) / (grid[lo + 1] - grid[lo]))
    }

    /// Bilinear interpolation, exact at grid points; clamps at the edges.
    pub fn eval(&self, s: f64, r: f64) -> EffectiveTensors {
        let out_of_range = s < self.u_grid[0]
            || s > self.u_grid[self.u_grid.len() - 1]
            || r < self.v_grid[0]
            || r > self.v_grid[self.v_grid.len() - 1];
        if out_of_range {
            self.clamped.fetch_add(1, Ordering::Relaxed);
        }
        let (iu, tu) = Self::locate(&self.u_grid, s);
        let (iv, tv) = Self::locate(&self.v_grid, r);
        let blend = |pick: &dyn Fn(&EffectiveTensors) -> f64| -> f64 {
            let f00 = pick(self.entry(iu, iv));
            let f01 = pick(self.entry(iu, iv + 1));
            let f10 = pick(self.entry(iu + 1, iv));
            let f11 = pick(self.entry(iu + 1, iv + 1));
            (1.0 - tu) * ((1.0 - tv) * f00 + tv * f01) + tu * ((1.0 - tv) * f10 + tv * f11)
        };
        EffectiveTensors {
            lambda: Tensor2 {
                xx: blend(&|e| e.lambda.xx),
                xy: blend(&|e| e.lambda.xy),
                yy: blend(&|e| e.lambda.yy),
            },
            d: Tensor2 {
                xx: blend(&|e| e.d.xx),
                xy: blend(&|e| e.d.xy),
                yy: blend(&|e| e.d.yy),
            },
            s,
            r,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{
        build_cell_mesh, build_full_gas_cell_mesh, build_laminate_cell_mesh,
    };
    use crate::microcell::solve_cell;

    const PI: f64 = std::f64::consts::PI;

    fn kin_ref() -> Kinetics {
        Kinetics::new(5.0, 2.5, 2.5).unwrap()
    }

    #[test]
    fn porosity_of_reference_cell() {
        let cell = build_cell_mesh(0.4, 64, 0.05).unwrap();
        let exact = 1.0 - 0.16 * PI;
        let theta = porosity(&cell);
        assert!((theta - exact).abs() / exact <= 0.002);
        // exact against the polygon
        let polygon = 32.0 * 0.16 * (2.0 * PI / 64.0).sin();
        assert!((theta - (1.0 - polygon)).abs() <= 1e-12);
    }

    #[test]
    fn porosity_without_inclusion_is_one() {
        let cell = build_full_gas_cell_mesh(6).unwrap();
        assert!((porosity(&cell) - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn heat_capacity_weights_areas() {
        let cell = build_cell_mesh(0.4, 64, 0.05).unwrap();
        let c = heat_capacity(&cell, 1.57e-3, 0.69).unwrap();
        assert!((c - 0.34761).abs() / 0.34761 <= 0.005);

        let unit = heat_capacity(&cell, 1.0, 1.0).unwrap();
        assert!((unit - 1.0).abs() <= 1e-12);

        // c_s → 0 is rejected (must be positive), but tiny c_s tends to θ·c_g
        let tiny = heat_capacity(&cell, 1.0, 1e-300).unwrap();
        assert!((tiny - porosity(&cell)).abs() <= 1e-12);
        assert!(heat_capacity(&cell, 0.0, 1.0).is_err());
    }

    #[test]
    fn homogeneous_cold_cell_gives_isotropic_lambda() {
        let cell = build_cell_mesh(0.3, 32, 0.12).unwrap();
        let materials = CellMaterials {
            lambda_s: 5e-4,
            lambda_g: 5e-4,
            ..CellMaterials::default()
        };
        let sol = solve_cell(-1.0, 0.1, &cell, &materials, &kin_ref()).unwrap();
        let lam = effective_lambda(&sol, -1.0, 0.1, &cell, &materials, &kin_ref()).unwrap();
        assert!((lam.xx - 5e-4).abs() <= 1e-8 * 5e-4 + 1e-12);
        assert!((lam.yy - 5e-4).abs() <= 1e-8 * 5e-4 + 1e-12);
        assert!(lam.xy.abs() <= 1e-12);
    }

    #[test]
    fn state_mismatch_is_rejected() {
        let cell = build_cell_mesh(0.3, 32, 0.12).unwrap();
        let materials = CellMaterials::default();
        let sol = solve_cell(2.0, 0.1, &cell, &materials, &kin_ref()).unwrap();
        assert!(effective_lambda(&sol, 2.0, 0.2, &cell, &materials, &kin_ref()).is_err());
        assert!(effective_d(&sol, 1.9, 0.1, &cell, &materials, &kin_ref()).is_err());
    }

    #[test]
    fn laminate_matches_series_parallel_means() {
        let materials = CellMaterials::default();
        let kin = kin_ref();
        let (lg, ls) = (materials.lambda_g, materials.lambda_s);
        let harmonic = 2.0 * lg * ls / (lg + ls);
        let arithmetic = 0.5 * (lg + ls);
        for nsub in [16, 32] {
            let cell = build_laminate_cell_mesh(nsub).unwrap();
            let sol = solve_cell(-1.0, 0.0, &cell, &materials, &kin).unwrap();
            let lam = effective_lambda(&sol, -1.0, 0.0, &cell, &materials, &kin).unwrap();
            assert!(
                (lam.xx - harmonic).abs() / harmonic <= 0.01,
                "λ11 {} vs harmonic {harmonic} at nsub={nsub}",
                lam.xx
            );
            assert!(
                (lam.yy - arithmetic).abs() / arithmetic <= 0.01,
                "λ22 {} vs arithmetic {arithmetic} at nsub={nsub}",
                lam.yy
            );
        }
    }

    #[test]
    fn circular_inclusion_cold_tensor_is_symmetric_and_bounded() {
        let cell = build_cell_mesh(0.4, 64, 0.05).unwrap();
        let materials = CellMaterials::default();
        let kin = kin_ref();
        let sol = solve_cell(-1.0, 0.0, &cell, &materials, &kin).unwrap();
        let lam = effective_lambda(&sol, -1.0, 0.0, &cell, &materials, &kin).unwrap();
        assert!((lam.xx - lam.yy).abs() <= 1e-6 * lam.xx);
        assert!(lam.xy.abs() <= 1e-8 * lam.xx);
        // Voigt–Reuss sandwich
        let theta = porosity(&cell);
        let voigt = theta * materials.lambda_g + (1.0 - theta) * materials.lambda_s;
        let reuss = 1.0 / (theta / materials.lambda_g + (1.0 - theta) / materials.lambda_s);
        let (lo, hi) = lam.eigenvalues();
        assert!(lo >= reuss * (1.0 - 1e-9) && hi <= voigt * (1.0 + 1e-9));

        let d = effective_d(&sol, -1.0, 0.0, &cell, &materials, &kin).unwrap();
        assert!(d.xx > 0.0 && d.xx < materials.d * theta);
    }

    #[test]
    fn full_gas_diffusivity_is_free_molecular() {
        let cell = build_full_gas_cell_mesh(8).unwrap();
        let materials = CellMaterials::default();
        let kin = kin_ref();
        let sol = solve_cell(-1.0, 0.0, &cell, &materials, &kin).unwrap();
        let d = effective_d(&sol, -1.0, 0.0, &cell, &materials, &kin).unwrap();
        assert!((d.xx - 0.25).abs() <= 1e-10);
        assert!((d.yy - 0.25).abs() <= 1e-10);
        assert!(d.xy.abs() <= 1e-12);
    }

    #[test]
    fn table_counts_and_exactness_at_nodes() {
        let cell = build_cell_mesh(0.3, 32, 0.12).unwrap();
        let problem = CellProblem::new(cell, CellMaterials::default()).unwrap();
        let kin = kin_ref();
        let table = TensorTable::build(vec![1.0, 2.0], vec![0.1, 0.5], &problem, &kin).unwrap();
        assert_eq!(table.n_entries(), 4);
        let probe = table.eval(2.0, 0.1);
        let direct = table.entry(1, 0);
        assert_eq!(probe.lambda.xx, direct.lambda.xx);
        assert_eq!(probe.d.yy, direct.d.yy);
        assert_eq!(table.clamp_count(), 0);
        // clamping is counted
        let _ = table.eval(5.0, 0.1);
        let _ = table.eval(1.5, -1.0);
        assert_eq!(table.clamp_count(), 2);
    }

    #[test]
    fn cold_rows_are_reaction_free() {
        let cell = build_cell_mesh(0.3, 32, 0.12).unwrap();
        let problem = CellProblem::new(cell.clone(), CellMaterials::default()).unwrap();
        let kin = kin_ref();
        let table =
            TensorTable::build(vec![-1.0, 0.0, 3.0], vec![0.0, 0.4], &problem, &kin).unwrap();
        // s ≤ 0 rows carry the pure-diffusion tensors
        let base = table.entry(0, 0);
        for iv in 0..2 {
            for iu in 0..2 {
                let e = table.entry(iu, iv);
                assert_eq!(e.lambda.xx, base.lambda.xx);
                assert_eq!(e.d.xx, base.d.xx);
            }
        }
        // v = 0 column is reaction-free even at s = 3
        let hot_dry = table.entry(2, 0);
        assert_eq!(hot_dry.lambda.xx, base.lambda.xx);
        // but the reacting corner differs
        let hot_wet = table.entry(2, 1);
        assert!(hot_wet.lambda.xx != base.lambda.xx);
    }

    #[test]
    fn interpolation_of_constant_patch_is_exact() {
        let cell = build_cell_mesh(0.3, 32, 0.12).unwrap();
        let problem = CellProblem::new(cell, CellMaterials::default()).unwrap();
        let kin = kin_ref();
        // all four corners in the cold region → identical entries
        let table = TensorTable::build(vec![-2.0, -1.0], vec![0.1, 0.2], &problem, &kin).unwrap();
        let mid = table.eval(-1.5, 0.15);
        assert!((mid.lambda.xx - table.entry(0, 0).lambda.xx).abs() <= 1e-15);
    }

    #[test]
    fn bad_grids_are_rejected() {
        let cell = build_cell_mesh(0.3, 32, 0.12).unwrap();
        let problem = CellProblem::new(cell, CellMaterials::default()).unwrap();
        let kin = kin_ref();
        assert!(TensorTable::build(vec![1.0], vec![0.0, 1.0], &problem, &kin).is_err());
        assert!(TensorTable::build(vec![1.0, 1.0], vec![0.0, 1.0], &problem, &kin).is_err());
        assert!(TensorTable::build(vec![2.0, 1.0], vec![0.0, 1.0], &problem, &kin).is_err());
    }
}

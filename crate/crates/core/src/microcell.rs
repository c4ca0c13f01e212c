//! The coupled corrector cell problem.
//!
//! For a macroscopic state (s, r) = (u, v) and direction j ∈ {1, 2}, find
//! Y-periodic (χ_j, ω_j) with
//!
//!   (λ(y)(e_j + ∇χ_j), ∇φ)_Y + Q(D(e_j + ∇ω_j), ∇ψ)_{Y_g}
//!     + Q f(s) ∫_Γ [r χ_j + (s²/u_a) ω_j] (ψ − φ) dσ = 0,
//!
//! the weak form obtained by integrating the interface jump conditions by
//! parts with the unit normal on Γ pointing from solid into gas.
//!
//! The problem is linear in (χ, ω): the nonlinearity lives entirely in the
//! (s, r)-dependence of the coefficients. χ spans all of Y with continuity
//! across Γ built into the shared dof; ω lives on gas nodes only (Γ nodes
//! carry both).
//!
//! Null space closure: the (φ − ψ) structure makes the all-ones test pair a
//! left null vector of the assembled operator, and the matching right kernel
//! is the constant pair ((s²/u_a)·𝟙, −r·𝟙). A single Lagrange multiplier
//! enforcing zero lumped-mass mean on the χ block closes the coupled system;
//! when the reaction is inactive the blocks decouple and each gets its own
//! zero-mean multiplier.
//!
//! The interface reaction is active only when Q, A, f(s) and r are all
//! positive: with no oxidizer (r ≤ 0) or no heat release the cell problem
//! reduces to the two classical periodic diffusion correctors. A coupling
//! smaller than 1e−12 of the diffusive scale is treated as inactive as well,
//! which keeps the system numerically full-rank in the deep-underflow regime
//! of f.

use crate::error::{Error, Result};
use crate::fem::{
    assemble_gradient_load, assemble_interface_mass, assemble_stiffness, lumped_mass_vector,
    DofMap, Tensor2,
};
use crate::kinetics::{arrhenius_f, Kinetics};
use crate::mesh::{CellMesh, Region};
use crate::sparse::{CsrMatrix, SparseLu, Triplets};

/// Per-region material constants (dimensionless).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellMaterials {
    pub lambda_g: f64,
    pub lambda_s: f64,
    pub d: f64,
    pub c_g: f64,
    pub c_s: f64,
}

impl CellMaterials {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_g", self.lambda_g),
            ("lambda_s", self.lambda_s),
            ("d", self.d),
            ("c_g", self.c_g),
            ("c_s", self.c_s),
        ] {
            if !(v > 0.0) {
                return Err(Error::invalid(format!(
                    "material constant {name} must be positive, got {v}"
                )));
            }
        }
        Ok(())
    }
}

impl Default for CellMaterials {
    /// Reference parameter set used by the bundled recipes.
    fn default() -> Self {
        CellMaterials {
            lambda_g: 2.38e-4,
            lambda_s: 7e-4,
            d: 0.25,
            c_g: 1.57e-3,
            c_s: 0.69,
        }
    }
}

/// Corrector fields at one (s, r) state, stored nodally. `omega` is zero on
/// nodes outside the gas region; `omega_support` marks where it is defined.
#[derive(Debug, Clone)]
pub struct CellSolution {
    pub s: f64,
    pub r: f64,
    pub chi: [Vec<f64>; 2],
    pub omega: [Vec<f64>; 2],
    pub omega_support: Vec<bool>,
    /// Relative weak-form residual per direction, verified at solve time.
    pub residuals: [f64; 2],
    /// Whether the interface reaction coupling was active.
    pub coupled: bool,
}

/// Mesh- and material-dependent operators, assembled once and reused across
/// (s, r) states. Immutable after construction, so cell solves at different
/// states can run concurrently against the same instance.
pub struct CellProblem {
    pub cell: CellMesh,
    pub materials: CellMaterials,
    chi_map: DofMap,
    omega_map: DofMap,
    k_lambda: CsrMatrix,
    /// D-stiffness over the gas region, not scaled by Q.
    k_d: CsrMatrix,
    m_cc: CsrMatrix,
    m_co: CsrMatrix,
    m_oc: CsrMatrix,
    m_oo: CsrMatrix,
    /// (λ e_j, ∇φ) and (D e_j, ∇ψ) per direction.
    g_lambda: [Vec<f64>; 2],
    g_d: [Vec<f64>; 2],
    w_chi: Vec<f64>,
    w_omega: Vec<f64>,
    perimeter: f64,
}

impl CellProblem {
    pub fn new(cell: CellMesh, materials: CellMaterials) -> Result<CellProblem> {
        materials.validate()?;
        cell.validate()?;
        let n_nodes = cell.mesh.n_nodes();
        let gas_nodes = cell.gas_nodes();
        let chi_map = DofMap::periodic(n_nodes, &cell.periodic_pairs, None);
        let omega_map = DofMap::periodic(n_nodes, &cell.periodic_pairs, Some(&gas_nodes));

        let lambda_coeff: Vec<Tensor2> = cell
            .region
            .iter()
            .map(|r| {
                Tensor2::isotropic(match r {
                    Region::Gas => materials.lambda_g,
                    Region::Solid => materials.lambda_s,
                })
            })
            .collect();
        let d_coeff = vec![Tensor2::isotropic(materials.d); cell.mesh.n_triangles()];
        let gas_mask: Vec<bool> = cell.region.iter().map(|&r| r == Region::Gas).collect();

        let k_lambda = assemble_stiffness(&cell.mesh, &lambda_coeff, None, &chi_map)?;
        let k_d = assemble_stiffness(&cell.mesh, &d_coeff, Some(&gas_mask), &omega_map)?;

        let nodes = &cell.mesh.nodes;
        let edges = &cell.interface_edges;
        let m_cc = assemble_interface_mass(nodes, edges, &chi_map, &chi_map);
        let m_co = assemble_interface_mass(nodes, edges, &chi_map, &omega_map);
        let m_oc = assemble_interface_mass(nodes, edges, &omega_map, &chi_map);
        let m_oo = assemble_interface_mass(nodes, edges, &omega_map, &omega_map);

        let g_lambda = [
            assemble_gradient_load(&cell.mesh, &lambda_coeff, None, 0, &chi_map),
            assemble_gradient_load(&cell.mesh, &lambda_coeff, None, 1, &chi_map),
        ];
        let g_d = [
            assemble_gradient_load(&cell.mesh, &d_coeff, Some(&gas_mask), 0, &omega_map),
            assemble_gradient_load(&cell.mesh, &d_coeff, Some(&gas_mask), 1, &omega_map),
        ];

        let w_chi = lumped_mass_vector(&cell.mesh, None, &chi_map);
        let w_omega = lumped_mass_vector(&cell.mesh, Some(&gas_mask), &omega_map);
        let perimeter = cell.interface_length();

        Ok(CellProblem {
            cell,
            materials,
            chi_map,
            omega_map,
            k_lambda,
            k_d,
            m_cc,
            m_co,
            m_oc,
            m_oo,
            g_lambda,
            g_d,
            w_chi,
            w_omega,
            perimeter,
        })
    }

    pub fn n_chi_dofs(&self) -> usize {
        self.chi_map.n_dofs()
    }

    pub fn n_omega_dofs(&self) -> usize {
        self.omega_map.n_dofs()
    }

    /// Q·f(s) when the interface reaction participates at this state, else 0.
    pub fn reaction_coupling(&self, s: f64, r: f64, kin: &Kinetics) -> f64 {
        if kin.q <= 0.0 || kin.a <= 0.0 || r <= 0.0 {
            return 0.0;
        }
        let f = arrhenius_f(s, kin);
        if f <= 0.0 {
            return 0.0;
        }
        let coupling = kin.q * f * (r + s * s / kin.u_a) * self.perimeter;
        let diffusive = self.materials.lambda_g.min(self.materials.lambda_s)
            + kin.q * self.materials.d;
        if coupling <= 1e-12 * diffusive {
            0.0
        } else {
            kin.q * f
        }
    }

    /// Assemble the coupled block operator (χ rows then ω rows, no
    /// constraint). `qf` is the coupling strength Q·f(s), zero when inactive.
    fn operator(&self, qf: f64, kappa: f64, r: f64) -> CsrMatrix {
        let (nc, no) = (self.n_chi_dofs(), self.n_omega_dofs());
        let mut t = Triplets::new(nc + no, nc + no);
        self.k_lambda.push_scaled_into(&mut t, 0, 0, 1.0);
        self.k_d.push_scaled_into(&mut t, nc, nc, 1.0);
        if qf > 0.0 {
            self.m_cc.push_scaled_into(&mut t, 0, 0, -qf * r);
            self.m_co.push_scaled_into(&mut t, 0, nc, -qf * kappa);
            self.m_oc.push_scaled_into(&mut t, nc, 0, qf * r);
            self.m_oo.push_scaled_into(&mut t, nc, nc, qf * kappa);
        }
        t.to_csr()
    }

    /// Solve the corrector problem for both directions at (s, r).
    pub fn solve(&self, s: f64, r: f64, kin: &Kinetics) -> Result<CellSolution> {
        let qf = self.reaction_coupling(s, r, kin);
        let (nc, no) = (self.n_chi_dofs(), self.n_omega_dofs());
        let mut chi_dofs: [Vec<f64>; 2] = [vec![], vec![]];
        let mut omega_dofs: [Vec<f64>; 2] = [vec![], vec![]];

        if qf > 0.0 {
            let kappa = s * s / kin.u_a;
            // k_d enters the coupled weak form scaled by Q
            let n = nc + no + 1;
            let mut t = Triplets::new(n, n);
            self.k_lambda.push_scaled_into(&mut t, 0, 0, 1.0);
            self.k_d.push_scaled_into(&mut t, nc, nc, kin.q);
            self.m_cc.push_scaled_into(&mut t, 0, 0, -qf * r);
            self.m_co.push_scaled_into(&mut t, 0, nc, -qf * kappa);
            self.m_oc.push_scaled_into(&mut t, nc, 0, qf * r);
            self.m_oo.push_scaled_into(&mut t, nc, nc, qf * kappa);
            for (j, &w) in self.w_chi.iter().enumerate() {
                if w != 0.0 {
                    t.push(n - 1, j, w);
                    t.push(j, n - 1, w);
                }
            }
            let a = t.to_csr();
            let lu = SparseLu::factorize(&a).map_err(|e| annotate(e, s, r))?;
            for dir in 0..2 {
                let mut b = vec![0.0; n];
                for (i, g) in self.g_lambda[dir].iter().enumerate() {
                    b[i] = -g;
                }
                for (i, g) in self.g_d[dir].iter().enumerate() {
                    b[nc + i] = -kin.q * g;
                }
                let x = lu.solve(&b);
                verify_residual(&a, &x, &b, s, r)?;
                chi_dofs[dir] = x[..nc].to_vec();
                omega_dofs[dir] = x[nc..nc + no].to_vec();
            }
        } else {
            // decoupled classical correctors, one zero-mean multiplier each
            let chi_sys = augmented(&self.k_lambda, &self.w_chi);
            let omega_sys = augmented(&self.k_d, &self.w_omega);
            let lu_chi = SparseLu::factorize(&chi_sys).map_err(|e| annotate(e, s, r))?;
            let lu_omega = SparseLu::factorize(&omega_sys).map_err(|e| annotate(e, s, r))?;
            for dir in 0..2 {
                let mut b = vec![0.0; nc + 1];
                for (i, g) in self.g_lambda[dir].iter().enumerate() {
                    b[i] = -g;
                }
                let x = lu_chi.solve(&b);
                verify_residual(&chi_sys, &x, &b, s, r)?;
                chi_dofs[dir] = x[..nc].to_vec();

                let mut b = vec![0.0; no + 1];
                for (i, g) in self.g_d[dir].iter().enumerate() {
                    b[i] = -g;
                }
                let x = lu_omega.solve(&b);
                verify_residual(&omega_sys, &x, &b, s, r)?;
                omega_dofs[dir] = x[..no].to_vec();
            }
        }

        let mut residuals = [0.0; 2];
        for dir in 0..2 {
            residuals[dir] =
                self.weak_residual_dofs(qf, s, r, kin, dir, &chi_dofs[dir], &omega_dofs[dir]);
        }

        let omega_support = self.cell.gas_nodes();
        Ok(CellSolution {
            s,
            r,
            chi: [
                self.chi_map.expand(&chi_dofs[0], 0.0),
                self.chi_map.expand(&chi_dofs[1], 0.0),
            ],
            omega: [
                self.omega_map.expand(&omega_dofs[0], 0.0),
                self.omega_map.expand(&omega_dofs[1], 0.0),
            ],
            omega_support,
            residuals,
            coupled: qf > 0.0,
        })
    }

    /// Relative weak-form residual of dof vectors for one direction.
    fn weak_residual_dofs(
        &self,
        qf: f64,
        s: f64,
        r: f64,
        kin: &Kinetics,
        dir: usize,
        chi: &[f64],
        omega: &[f64],
    ) -> f64 {
        let kappa = s * s / kin.u_a;
        // effective Q scaling of the ω block: Q when coupled, 1 when the
        // decoupled classical corrector was solved (equivalent for Q > 0)
        let q_eff = if qf > 0.0 { kin.q } else { 1.0 };
        let (nc, no) = (self.n_chi_dofs(), self.n_omega_dofs());
        let mut residual = vec![0.0; nc + no];
        let mut load = vec![0.0; nc + no];
        for (i, g) in self.g_lambda[dir].iter().enumerate() {
            load[i] = -g;
        }
        for (i, g) in self.g_d[dir].iter().enumerate() {
            load[nc + i] = -q_eff * g;
        }
        let kl = self.k_lambda.matvec_alloc(chi);
        for (i, v) in kl.iter().enumerate() {
            residual[i] += v;
        }
        let kd = self.k_d.matvec_alloc(omega);
        for (i, v) in kd.iter().enumerate() {
            residual[nc + i] += q_eff * v;
        }
        if qf > 0.0 {
            for (i, v) in self.m_cc.matvec_alloc(chi).iter().enumerate() {
                residual[i] -= qf * r * v;
            }
            for (i, v) in self.m_co.matvec_alloc(omega).iter().enumerate() {
                residual[i] -= qf * kappa * v;
            }
            for (i, v) in self.m_oc.matvec_alloc(chi).iter().enumerate() {
                residual[nc + i] += qf * r * v;
            }
            for (i, v) in self.m_oo.matvec_alloc(omega).iter().enumerate() {
                residual[nc + i] += qf * kappa * v;
            }
        }
        let mut num = 0.0f64;
        let mut den = 0.0f64;
        for i in 0..nc + no {
            num += (residual[i] - load[i]) * (residual[i] - load[i]);
            den += load[i] * load[i];
        }
        if den > 0.0 {
            (num / den).sqrt()
        } else {
            num.sqrt()
        }
    }

    /// Weak residual of a nodal solution (contracts the nodal fields back to
    /// dofs first). This is the post-hoc verification entry point.
    pub fn weak_residual(&self, sol: &CellSolution, kin: &Kinetics) -> f64 {
        let qf = self.reaction_coupling(sol.s, sol.r, kin);
        let mut worst = 0.0f64;
        for dir in 0..2 {
            let chi = self.contract(&sol.chi[dir], &self.chi_map);
            let omega = self.contract(&sol.omega[dir], &self.omega_map);
            worst = worst.max(self.weak_residual_dofs(qf, sol.s, sol.r, kin, dir, &chi, &omega));
        }
        worst
    }

    fn contract(&self, nodal: &[f64], map: &DofMap) -> Vec<f64> {
        let mut dofs = vec![0.0; map.n_dofs()];
        for (node, v) in nodal.iter().enumerate() {
            if let Some(d) = map.dof(node) {
                dofs[d] = *v;
            }
        }
        dofs
    }

    /// The assembled operator without constraints, for kernel diagnostics.
    pub fn unconstrained_operator(&self, s: f64, r: f64, kin: &Kinetics) -> CsrMatrix {
        let qf = self.reaction_coupling(s, r, kin);
        self.operator(qf, s * s / kin.u_a, r)
    }
}

fn augmented(k: &CsrMatrix, w: &[f64]) -> CsrMatrix {
    let n = k.n_rows();
    let mut t = Triplets::new(n + 1, n + 1);
    k.push_scaled_into(&mut t, 0, 0, 1.0);
    for (j, &wj) in w.iter().enumerate() {
        if wj != 0.0 {
            t.push(n, j, wj);
            t.push(j, n, wj);
        }
    }
    t.to_csr()
}

fn verify_residual(a: &CsrMatrix, x: &[f64], b: &[f64], s: f64, r: f64) -> Result<()> {
    let ax = a.matvec_alloc(x);
    let mut num = 0.0;
    let mut den = 0.0;
    for (axi, bi) in ax.iter().zip(b) {
        num += (axi - bi) * (axi - bi);
        den += bi * bi;
    }
    let rel = if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };
    if rel > 1e-9 {
        return Err(Error::SolverFailure {
            residual: rel,
            message: format!("cell system at (s, r) = ({s}, {r})"),
        });
    }
    Ok(())
}

fn annotate(e: Error, s: f64, r: f64) -> Error {
    match e {
        Error::SolverFailure { residual, message } => Error::SolverFailure {
            residual,
            message: format!("{message} [cell state (s, r) = ({s}, {r})]"),
        },
        other => other,
    }
}

/// One-shot wrapper: build the operators and solve at a single state.
pub fn solve_cell(
    s: f64,
    r: f64,
    cell: &CellMesh,
    materials: &CellMaterials,
    kin: &Kinetics,
) -> Result<CellSolution> {
    CellProblem::new(cell.clone(), *materials)?.solve(s, r, kin)
}

/// Recompute the weak-form residual of a solution from freshly assembled
/// operators (the element and edge quadratures are exact for P1 data, so the
/// fresh assembly is the reference quadrature).
pub fn cell_residual(
    sol: &CellSolution,
    cell: &CellMesh,
    materials: &CellMaterials,
    kin: &Kinetics,
) -> Result<f64> {
    let problem = CellProblem::new(cell.clone(), *materials)?;
    Ok(problem.weak_residual(sol, kin))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{build_cell_mesh, build_full_gas_cell_mesh, match_nodes_under};

    fn kin_ref() -> Kinetics {
        Kinetics::new(5.0, 2.5, 2.5).unwrap()
    }

    fn max_abs(v: &[f64]) -> f64 {
        v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    #[test]
    fn full_gas_cell_has_trivial_correctors() {
        let cell = build_full_gas_cell_mesh(8).unwrap();
        let materials = CellMaterials::default();
        let sol = solve_cell(5.0, 0.5, &cell, &materials, &kin_ref()).unwrap();
        assert!(!sol.coupled);
        for dir in 0..2 {
            assert!(max_abs(&sol.chi[dir]) <= 1e-10);
            assert!(max_abs(&sol.omega[dir]) <= 1e-10);
        }
    }

    #[test]
    fn homogeneous_conductivity_gives_zero_chi() {
        let cell = build_cell_mesh(0.3, 32, 0.12).unwrap();
        let materials = CellMaterials {
            lambda_s: 2.38e-4, // same as gas
            ..CellMaterials::default()
        };
        let sol = solve_cell(-1.0, 0.5, &cell, &materials, &kin_ref()).unwrap();
        assert!(!sol.coupled);
        for dir in 0..2 {
            assert!(max_abs(&sol.chi[dir]) <= 1e-10);
            // ω still sees the obstacle
            assert!(max_abs(&sol.omega[dir]) > 1e-3);
        }
    }

    #[test]
    fn q_zero_a_zero_and_cold_all_decouple_identically() {
        let cell = build_cell_mesh(0.4, 32, 0.1).unwrap();
        let materials = CellMaterials::default();
        let q0 = solve_cell(5.0, 0.05, &cell, &materials, &Kinetics::new(5.0, 2.5, 0.0).unwrap())
            .unwrap();
        let a0 = solve_cell(5.0, 0.05, &cell, &materials, &Kinetics::new(0.0, 2.5, 2.5).unwrap())
            .unwrap();
        let cold = solve_cell(-1.0, 0.05, &cell, &materials, &kin_ref()).unwrap();
        for dir in 0..2 {
            for i in 0..cell.mesh.n_nodes() {
                assert!((q0.chi[dir][i] - a0.chi[dir][i]).abs() <= 1e-12);
                assert!((q0.chi[dir][i] - cold.chi[dir][i]).abs() <= 1e-12);
                assert!((q0.omega[dir][i] - a0.omega[dir][i]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn deep_underflow_state_matches_cold_state() {
        let cell = build_cell_mesh(0.3, 32, 0.12).unwrap();
        let materials = CellMaterials::default();
        let tiny = solve_cell(1e-3, 0.5, &cell, &materials, &kin_ref()).unwrap();
        let cold = solve_cell(-1.0, 0.5, &cell, &materials, &kin_ref()).unwrap();
        assert!(!tiny.coupled);
        for dir in 0..2 {
            for i in 0..cell.mesh.n_nodes() {
                assert!((tiny.chi[dir][i] - cold.chi[dir][i]).abs() <= 1e-13);
            }
        }
    }

    #[test]
    fn chi_fields_respect_quarter_turn_symmetry() {
        let cell = build_cell_mesh(0.4, 32, 0.1).unwrap();
        let materials = CellMaterials::default();
        // rotation by 90°: (x, y) → (1−y, x) maps the e₁ problem onto e₂
        let rot = match_nodes_under(&cell.mesh, |p| [1.0 - p[1], p[0]], 1e-12).unwrap();
        for (s, r) in [(-1.0, 0.1), (5.0, 0.05)] {
            let sol = solve_cell(s, r, &cell, &materials, &kin_ref()).unwrap();
            let mut worst = 0.0f64;
            for i in 0..cell.mesh.n_nodes() {
                // χ₂ at the rotated node equals χ₁ at the original
                worst = worst.max((sol.chi[1][rot[i]] - sol.chi[0][i]).abs());
            }
            let scale = max_abs(&sol.chi[0]).max(1e-30);
            assert!(worst <= 1e-8 * scale, "rotation defect {worst} at ({s}, {r})");
        }
    }

    #[test]
    fn residuals_are_verified_small() {
        let cell = build_cell_mesh(0.4, 32, 0.1).unwrap();
        let materials = CellMaterials::default();
        let kin = kin_ref();
        let sol = solve_cell(5.0, 0.05, &cell, &materials, &kin).unwrap();
        assert!(sol.coupled);
        assert!(sol.residuals[0] <= 1e-9 && sol.residuals[1] <= 1e-9);

        let fresh = cell_residual(&sol, &cell, &materials, &kin).unwrap();
        assert!(fresh <= 1e-9);

        // perturbing one dof must raise the residual
        let mut bent = sol.clone();
        bent.chi[0][17] += 1.0;
        let worse = cell_residual(&bent, &cell, &materials, &kin).unwrap();
        assert!(worse > 10.0 * fresh.max(1e-12));

        // the zero field scores ≈ 1 by normalization
        let mut zero = sol.clone();
        for dir in 0..2 {
            zero.chi[dir].iter_mut().for_each(|v| *v = 0.0);
            zero.omega[dir].iter_mut().for_each(|v| *v = 0.0);
        }
        let unit = cell_residual(&zero, &cell, &materials, &kin).unwrap();
        assert!((unit - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn chi_block_mean_is_pinned() {
        let cell = build_cell_mesh(0.4, 32, 0.1).unwrap();
        let materials = CellMaterials::default();
        let problem = CellProblem::new(cell.clone(), materials).unwrap();
        for (s, r) in [(5.0, 0.05), (-1.0, 0.1)] {
            let sol = problem.solve(s, r, &kin_ref()).unwrap();
            let chi_dofs = problem.contract(&sol.chi[0], &problem.chi_map);
            let mean: f64 = chi_dofs
                .iter()
                .zip(&problem.w_chi)
                .map(|(x, w)| x * w)
                .sum();
            assert!(mean.abs() <= 1e-12, "χ mean {mean} at ({s}, {r})");
        }
    }

    #[test]
    fn operator_kernel_structure() {
        let cell = build_cell_mesh(0.4, 32, 0.1).unwrap();
        let materials = CellMaterials::default();
        let problem = CellProblem::new(cell.clone(), materials).unwrap();
        let kin = kin_ref();
        let (s, r) = (5.0, 0.05);
        let a = problem.unconstrained_operator(s, r, &kin);
        let (nc, no) = (problem.n_chi_dofs(), problem.n_omega_dofs());
        let scale = a.max_abs();

        // right kernel: the constant pair ((s²/u_a)·𝟙, −r·𝟙)
        let kappa = s * s / kin.u_a;
        let mut kvec = vec![kappa; nc];
        kvec.extend(std::iter::repeat(-r).take(no));
        let ak = a.matvec_alloc(&kvec);
        assert!(max_abs(&ak) <= 1e-10 * scale * kappa.max(r));

        // left kernel: all equations sum to zero, so Σ rows of A·x vanishes
        use rand::rngs::StdRng;
        use rand::{Rng, SeedableRng};
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..5 {
            let x: Vec<f64> = (0..nc + no).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let ax = a.matvec_alloc(&x);
            let total: f64 = ax.iter().sum();
            assert!(total.abs() <= 1e-10 * scale * (nc + no) as f64);
        }
    }

    #[test]
    fn gauge_shift_leaves_weak_residual_unchanged() {
        let cell = build_cell_mesh(0.4, 32, 0.1).unwrap();
        let materials = CellMaterials::default();
        let problem = CellProblem::new(cell.clone(), materials).unwrap();
        let kin = kin_ref();
        let (s, r) = (5.0, 0.05);
        let sol = problem.solve(s, r, &kin).unwrap();
        let base = problem.weak_residual(&sol, &kin);

        let kappa = s * s / kin.u_a;
        let c = 0.37;
        let mut shifted = sol.clone();
        for dir in 0..2 {
            for v in shifted.chi[dir].iter_mut() {
                *v += c * kappa;
            }
            for (i, v) in shifted.omega[dir].iter_mut().enumerate() {
                if shifted.omega_support[i] {
                    *v -= c * r;
                }
            }
        }
        let after = problem.weak_residual(&shifted, &kin);
        assert!((after - base).abs() <= 1e-9);
    }

    #[test]
    fn joint_scaling_leaves_decoupled_solution_invariant() {
        let cell = build_cell_mesh(0.3, 32, 0.12).unwrap();
        let base = CellMaterials::default();
        let alpha = 3.7;
        let scaled = CellMaterials {
            lambda_g: alpha * base.lambda_g,
            lambda_s: alpha * base.lambda_s,
            d: alpha * base.d,
            ..base
        };
        let kin = kin_ref();
        let s1 = solve_cell(-1.0, 0.0, &cell, &base, &kin).unwrap();
        let s2 = solve_cell(-1.0, 0.0, &cell, &scaled, &kin).unwrap();
        for dir in 0..2 {
            for i in 0..cell.mesh.n_nodes() {
                assert!((s1.chi[dir][i] - s2.chi[dir][i]).abs() <= 1e-10);
                assert!((s1.omega[dir][i] - s2.omega[dir][i]).abs() <= 1e-10);
            }
        }
    }
}

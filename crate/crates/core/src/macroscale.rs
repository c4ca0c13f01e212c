//! Semi-implicit time stepping of the coupled quasilinear macro system
//!
//!   c ∂_t u = ∇·(λ(u, v) ∇u),   θ ∂_t v = ∇·(𝒟(u, v) ∇v)
//!
//! on the rectangle, with Dirichlet data on x₁ = 0 and zero-flux elsewhere.
//! Each step freezes the tensors at the previous time level (evaluated at the
//! element centroid state) and solves the two SPD systems
//!
//!   (c/dt)·M_L (uⁿ⁺¹ − uⁿ) + K(λ(uⁿ, vⁿ)) uⁿ⁺¹ = F,
//!
//! with M_L the lumped mass. The u and v solves within a step are independent
//! (they couple only through the frozen tensor arguments).

use crate::error::{Error, Result};
use crate::fem::{lumped_mass_vector, DofMap, Tensor2};
use crate::mesh::{Mesh, NodeTag};
use crate::sparse::{solve_linear_from, SolveOptions, Triplets};
use crate::tensors::{EffectiveScalars, EffectiveTensors, TensorTable};

/// Supplies effective tensors for a macroscopic state.
pub trait TensorSource: Sync {
    fn tensors_at(&self, s: f64, r: f64) -> Result<(Tensor2, Tensor2)>;
}

impl TensorSource for TensorTable {
    fn tensors_at(&self, s: f64, r: f64) -> Result<(Tensor2, Tensor2)> {
        let EffectiveTensors { lambda, d, .. } = self.eval(s, r);
        Ok((lambda, d))
    }
}

/// Fixed tensors everywhere; exercised by tests and the manufactured runs.
pub struct ConstantSource {
    pub lambda: Tensor2,
    pub d: Tensor2,
}

impl TensorSource for ConstantSource {
    fn tensors_at(&self, _s: f64, _r: f64) -> Result<(Tensor2, Tensor2)> {
        Ok((self.lambda, self.d))
    }
}

/// Solves the cell problem at every queried state. Exact but expensive;
/// intended for small meshes and cross-checks of the table path.
pub struct DirectCellSource<'a> {
    pub problem: &'a crate::microcell::CellProblem,
    pub kin: crate::kinetics::Kinetics,
}

impl TensorSource for DirectCellSource<'_> {
    fn tensors_at(&self, s: f64, r: f64) -> Result<(Tensor2, Tensor2)> {
        let sol = self.problem.solve(s, r, &self.kin)?;
        let t = crate::tensors::effective_tensors(
            &sol,
            &self.problem.cell,
            &self.problem.materials,
            &self.kin,
        )?;
        Ok((t.lambda, t.d))
    }
}

/// Nodal temperature and concentration at time t.
#[derive(Debug, Clone)]
pub struct MacroState {
    pub t: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

/// Optional per-step extensions: volumetric sources and time-dependent
/// Dirichlet data, used by the manufactured-solution studies.
#[derive(Default)]
pub struct StepExtras<'a> {
    pub u_source: Option<&'a (dyn Fn(f64, [f64; 2]) -> f64 + Sync)>,
    pub v_source: Option<&'a (dyn Fn(f64, [f64; 2]) -> f64 + Sync)>,
    pub u_dirichlet: Option<&'a (dyn Fn(f64, [f64; 2]) -> f64 + Sync)>,
    pub v_dirichlet: Option<&'a (dyn Fn(f64, [f64; 2]) -> f64 + Sync)>,
}

pub struct MacroProblem {
    pub mesh: Mesh,
    pub scalars: EffectiveScalars,
    pub dt: f64,
    pub u_dirichlet: f64,
    pub v_dirichlet: f64,
    lumped: Vec<f64>,
    dirichlet: Vec<bool>,
    domain_area: f64,
}

impl MacroProblem {
    pub fn new(
        mesh: Mesh,
        scalars: EffectiveScalars,
        dt: f64,
        u_dirichlet: f64,
        v_dirichlet: f64,
    ) -> Result<MacroProblem> {
        if !(dt > 0.0) {
            return Err(Error::invalid(format!("time step must be positive, got {dt}")));
        }
        if !(u_dirichlet.is_finite() && v_dirichlet.is_finite()) {
            return Err(Error::invalid("Dirichlet data must be finite"));
        }
        if mesh.n_triangles() == 0 {
            return Err(Error::invalid("macro mesh has no elements"));
        }
        let map = DofMap::from_mesh(&mesh);
        let lumped = lumped_mass_vector(&mesh, None, &map);
        let dirichlet: Vec<bool> = mesh
            .node_tags
            .iter()
            .map(|&t| t == NodeTag::Dirichlet)
            .collect();
        let domain_area = mesh.total_area();
        Ok(MacroProblem {
            mesh,
            scalars,
            dt,
            u_dirichlet,
            v_dirichlet,
            lumped,
            dirichlet,
            domain_area,
        })
    }

    /// t = 0 state: constants u_I, v_I with Dirichlet nodes overwritten.
    pub fn init(&self, u_init: f64, v_init: f64) -> MacroState {
        let n = self.mesh.n_nodes();
        let mut u = vec![u_init; n];
        let mut v = vec![v_init; n];
        for i in 0..n {
            if self.dirichlet[i] {
                u[i] = self.u_dirichlet;
                v[i] = self.v_dirichlet;
            }
        }
        MacroState { t: 0.0, u, v }
    }

    /// Lumped-mass average (1/|Ω|) ∫ u dx; exact for P1 fields.
    pub fn average(&self, nodal: &[f64]) -> f64 {
        let total: f64 = nodal.iter().zip(&self.lumped).map(|(x, m)| x * m).sum();
        total / self.domain_area
    }

    pub fn average_temperature(&self, state: &MacroState) -> f64 {
        self.average(&state.u)
    }

    /// One semi-implicit Euler step.
    pub fn step(&self, state: &MacroState, source: &dyn TensorSource) -> Result<MacroState> {
        self.step_with(state, source, &StepExtras::default())
    }

    pub fn step_with(
        &self,
        state: &MacroState,
        source: &dyn TensorSource,
        extras: &StepExtras,
    ) -> Result<MacroState> {
        let n = self.mesh.n_nodes();
        if state.u.len() != n || state.v.len() != n {
            return Err(Error::invalid("state length does not match mesh"));
        }
        let t_next = state.t + self.dt;

        // tensors frozen at the element-centroid state of time level n
        let n_el = self.mesh.n_triangles();
        let mut lambda_coeff = Vec::with_capacity(n_el);
        let mut d_coeff = Vec::with_capacity(n_el);
        for tri in &self.mesh.triangles {
            let s = (state.u[tri[0]] + state.u[tri[1]] + state.u[tri[2]]) / 3.0;
            let r = (state.v[tri[0]] + state.v[tri[1]] + state.v[tri[2]]) / 3.0;
            let (lambda, d) = source.tensors_at(s, r)?;
            lambda_coeff.push(lambda);
            d_coeff.push(d);
        }

        let u_bc = |p: [f64; 2]| match extras.u_dirichlet {
            Some(g) => g(t_next, p),
            None => self.u_dirichlet,
        };
        let v_bc = |p: [f64; 2]| match extras.v_dirichlet {
            Some(g) => g(t_next, p),
            None => self.v_dirichlet,
        };

        let u_next = self.solve_field(
            &state.u,
            &lambda_coeff,
            self.scalars.c,
            &u_bc,
            t_next,
            extras.u_source,
        )?;
        let v_next = self.solve_field(
            &state.v,
            &d_coeff,
            self.scalars.theta,
            &v_bc,
            t_next,
            extras.v_source,
        )?;

        Ok(MacroState {
            t: t_next,
            u: u_next,
            v: v_next,
        })
    }

    /// Assemble and solve (m/dt)·M_L x + K x = (m/dt)·M_L xⁿ + F with
    /// Dirichlet elimination folded into the assembly.
    fn solve_field(
        &self,
        previous: &[f64],
        coeff: &[Tensor2],
        capacity: f64,
        bc: &dyn Fn([f64; 2]) -> f64,
        t_next: f64,
        volumetric: Option<&(dyn Fn(f64, [f64; 2]) -> f64 + Sync)>,
    ) -> Result<Vec<f64>> {
        let n = self.mesh.n_nodes();
        let scale = capacity / self.dt;
        let mut rhs = vec![0.0; n];
        let mut t = Triplets::new(n, n);

        let bc_value: Vec<f64> = (0..n)
            .map(|i| {
                if self.dirichlet[i] {
                    bc(self.mesh.nodes[i])
                } else {
                    0.0
                }
            })
            .collect();

        for i in 0..n {
            if self.dirichlet[i] {
                continue;
            }
            let m = scale * self.lumped[i];
            t.push(i, i, m);
            rhs[i] += m * previous[i];
            if let Some(f) = volumetric {
                rhs[i] += self.lumped[i] * f(t_next, self.mesh.nodes[i]);
            }
        }

        for (e, tri) in self.mesh.triangles.iter().enumerate() {
            let tensor = coeff[e];
            if !tensor.is_positive_definite() {
                return Err(Error::Assembly(format!(
                    "effective tensor at element {e} is not positive definite ({tensor:?})"
                )));
            }
            let p = tri.map(|i| self.mesh.nodes[i]);
            let two_a = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1])
                - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
            let grads = [
                [(p[1][1] - p[2][1]) / two_a, (p[2][0] - p[1][0]) / two_a],
                [(p[2][1] - p[0][1]) / two_a, (p[0][0] - p[2][0]) / two_a],
                [(p[0][1] - p[1][1]) / two_a, (p[1][0] - p[0][0]) / two_a],
            ];
            let area = 0.5 * two_a;
            for a in 0..3 {
                let ga = tri[a];
                if self.dirichlet[ga] {
                    continue;
                }
                let flux_a = tensor.apply(grads[a]);
                for b in 0..3 {
                    let gb = tri[b];
                    let k = area * (flux_a[0] * grads[b][0] + flux_a[1] * grads[b][1]);
                    if self.dirichlet[gb] {
                        rhs[ga] -= k * bc_value[gb];
                    } else {
                        t.push(ga, gb, k);
                    }
                }
            }
        }
        for i in 0..n {
            if self.dirichlet[i] {
                t.push(i, i, 1.0);
                rhs[i] = bc_value[i];
            }
        }

        let a = t.to_csr();
        let sol = solve_linear_from(&a, &rhs, Some(previous), &SolveOptions::cg())?;
        let mut x = sol.x;
        for i in 0..n {
            if self.dirichlet[i] {
                x[i] = bc_value[i]; // exact, not up to CG tolerance
            }
        }
        Ok(x)
    }
}

/// Time-series output of a run, plus any snapshots taken along the way.
#[derive(Debug, Clone)]
pub struct RunResult {
    pub times: Vec<f64>,
    pub u_avg: Vec<f64>,
    pub v_avg: Vec<f64>,
    pub snapshots: Vec<MacroState>,
    /// Worst excursion of u outside [min(u_I, u_D), max(u_I, u_D)] observed
    /// during the run (discrete maximum-principle monitor).
    pub max_principle_excess: f64,
}

/// A finished or aborted run: on step failure the partial series is kept so
/// callers can flush what exists alongside the error record.
pub struct RunOutcome {
    pub result: RunResult,
    pub error: Option<Error>,
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub t_end: f64,
    /// Snapshot cadence in time units; None keeps only initial and final states.
    pub snapshot_interval: Option<f64>,
}

pub fn run(
    problem: &MacroProblem,
    u_init: f64,
    v_init: f64,
    source: &dyn TensorSource,
    opts: RunOptions,
) -> RunOutcome {
    let mut state = problem.init(u_init, v_init);
    let (u_lo, u_hi) = (
        u_init.min(problem.u_dirichlet),
        u_init.max(problem.u_dirichlet),
    );
    let n_steps = if opts.t_end <= 0.0 {
        0
    } else {
        (opts.t_end / problem.dt).round().max(1.0) as usize
    };

    let mut result = RunResult {
        times: vec![0.0],
        u_avg: vec![problem.average(&state.u)],
        v_avg: vec![problem.average(&state.v)],
        snapshots: vec![state.clone()],
        max_principle_excess: 0.0,
    };
    let mut next_snapshot = opts.snapshot_interval.map(|s| s.max(problem.dt));

    for _ in 0..n_steps {
        state = match problem.step(&state, source) {
            Ok(next) => next,
            Err(e) => {
                return RunOutcome {
                    result,
                    error: Some(e),
                }
            }
        };
        result.times.push(state.t);
        result.u_avg.push(problem.average(&state.u));
        result.v_avg.push(problem.average(&state.v));
        for &ui in &state.u {
            let excess = (u_lo - ui).max(ui - u_hi).max(0.0);
            result.max_principle_excess = result.max_principle_excess.max(excess);
        }
        if let Some(interval) = next_snapshot {
            if state.t + 1e-9 * problem.dt >= interval + result.snapshots.last().unwrap().t {
                result.snapshots.push(state.clone());
            }
        }
        let _ = &mut next_snapshot;
    }
    if result
        .snapshots
        .last()
        .map(|s| s.t != state.t)
        .unwrap_or(true)
    {
        result.snapshots.push(state);
    }
    RunOutcome {
        result,
        error: None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_macro_mesh;

    fn scalars() -> EffectiveScalars {
        EffectiveScalars {
            theta: 0.5,
            c: 0.35,
        }
    }

    fn identity_source() -> ConstantSource {
        ConstantSource {
            lambda: Tensor2::isotropic(1.0),
            d: Tensor2::isotropic(0.5),
        }
    }

    #[test]
    fn init_fills_interior_and_boundary() {
        let mesh = build_macro_mesh(5.0, 2.5, 8, 4).unwrap();
        let problem = MacroProblem::new(mesh, scalars(), 0.01, 5.0, 0.05).unwrap();
        let state = problem.init(1.7, 0.1);
        for (i, p) in problem.mesh.nodes.iter().enumerate() {
            if p[0] == 0.0 {
                assert_eq!(state.u[i], 5.0);
                assert_eq!(state.v[i], 0.05);
            } else {
                assert_eq!(state.u[i], 1.7);
                assert_eq!(state.v[i], 0.1);
            }
        }
    }

    #[test]
    fn compatible_constant_state_is_a_fixed_point() {
        let mesh = build_macro_mesh(2.0, 1.0, 6, 3).unwrap();
        let problem = MacroProblem::new(mesh, scalars(), 0.05, 3.0, 0.2).unwrap();
        let state = problem.init(3.0, 0.2); // matches the Dirichlet data
        let next = problem.step(&state, &identity_source()).unwrap();
        for i in 0..problem.mesh.n_nodes() {
            assert!((next.u[i] - 3.0).abs() <= 1e-12);
            assert!((next.v[i] - 0.2).abs() <= 1e-12);
        }
    }

    #[test]
    fn dirichlet_nodes_stay_exact_while_interior_relaxes() {
        let mesh = build_macro_mesh(5.0, 2.5, 10, 5).unwrap();
        let problem = MacroProblem::new(mesh, scalars(), 0.01, 5.0, 0.05).unwrap();
        let state = problem.init(1.7, 0.1);
        let next = problem.step(&state, &identity_source()).unwrap();
        let mut moved = false;
        for (i, p) in problem.mesh.nodes.iter().enumerate() {
            if p[0] == 0.0 {
                assert_eq!(next.u[i], 5.0);
                assert_eq!(next.v[i], 0.05);
            } else if next.u[i] > 1.7 + 1e-9 {
                moved = true;
            }
        }
        assert!(moved, "heat should creep in from the hot boundary");
        assert!((next.t - 0.01).abs() <= 1e-15);
    }

    #[test]
    fn average_temperature_is_exact_for_linears() {
        let mesh = build_macro_mesh(4.0, 2.0, 8, 4).unwrap();
        let problem = MacroProblem::new(mesh, scalars(), 0.01, 0.0, 0.0).unwrap();
        let constant = MacroState {
            t: 0.0,
            u: vec![3.0; problem.mesh.n_nodes()],
            v: vec![0.0; problem.mesh.n_nodes()],
        };
        assert_eq!(problem.average_temperature(&constant), 3.0);

        let linear = MacroState {
            t: 0.0,
            u: problem.mesh.nodes.iter().map(|p| 1.0 + 2.0 * p[0]).collect(),
            v: vec![0.0; problem.mesh.n_nodes()],
        };
        // mean of 1 + 2x over [0,4] is 5
        assert!((problem.average_temperature(&linear) - 5.0).abs() <= 1e-12);
    }

    #[test]
    fn solver_succeeds_across_dt_sweep() {
        let mesh = build_macro_mesh(1.0, 1.0, 8, 8).unwrap();
        for dt in [1e-4, 1e-2, 1.0, 100.0] {
            let problem = MacroProblem::new(mesh.clone(), scalars(), dt, 2.0, 0.1).unwrap();
            let state = problem.init(1.0, 0.5);
            assert!(problem.step(&state, &identity_source()).is_ok());
        }
    }

    #[test]
    fn run_records_monotone_bounded_warming() {
        let mesh = build_macro_mesh(1.0, 0.5, 10, 5).unwrap();
        let problem = MacroProblem::new(mesh, scalars(), 0.01, 2.0, 0.1).unwrap();
        let outcome = run(
            &problem,
            1.0,
            0.1,
            &identity_source(),
            RunOptions {
                t_end: 0.5,
                snapshot_interval: None,
            },
        );
        assert!(outcome.error.is_none());
        let r = outcome.result;
        assert_eq!(r.times.len(), 51);
        for w in r.u_avg.windows(2) {
            assert!(w[1] >= w[0] - 1e-12, "u_avg must not decrease");
        }
        assert!(r.max_principle_excess <= 1e-10);
        // long enough to be close to the uniform steady state at u_D = 2
        assert!(*r.u_avg.last().unwrap() > 1.9);
    }

    #[test]
    fn zero_t_end_keeps_initial_snapshot_only() {
        let mesh = build_macro_mesh(1.0, 1.0, 4, 4).unwrap();
        let problem = MacroProblem::new(mesh, scalars(), 0.01, 2.0, 0.1).unwrap();
        let outcome = run(
            &problem,
            1.0,
            0.1,
            &identity_source(),
            RunOptions {
                t_end: 0.0,
                snapshot_interval: None,
            },
        );
        assert!(outcome.error.is_none());
        assert_eq!(outcome.result.times.len(), 1);
        assert_eq!(outcome.result.snapshots.len(), 1);
    }

    #[test]
    fn invalid_configuration_is_rejected() {
        let mesh = build_macro_mesh(1.0, 1.0, 2, 2).unwrap();
        assert!(MacroProblem::new(mesh.clone(), scalars(), 0.0, 1.0, 1.0).is_err());
        assert!(MacroProblem::new(mesh, scalars(), 0.01, f64::NAN, 1.0).is_err());
    }
}

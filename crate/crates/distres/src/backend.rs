//! Continuous SOCP backend on top of the Clarabel interior-point solver.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettings, DefaultSettingsBuilder, DefaultSolver, IPSolver, NonnegativeConeT,
    SecondOrderConeT, SolverStatus, SupportedConeT, ZeroConeT,
};
use distres_core::solver::{AffineRow, BackendResult, ContinuousBackend, ContinuousStatus, StandardForm};
use rayon::prelude::*;

#[derive(Debug)]
pub struct ClarabelBackend {
    pool: Option<rayon::ThreadPool>,
    pub max_iter: u32,
}

impl Default for ClarabelBackend {
    fn default() -> Self {
        Self::new(1)
    }
}

impl ClarabelBackend {
    /// `threads > 1` solves batches of nodes concurrently.
    pub fn new(threads: usize) -> Self {
        let pool = if threads > 1 {
            rayon::ThreadPoolBuilder::new().num_threads(threads).build().ok()
        } else {
            None
        };
        ClarabelBackend { pool, max_iter: 200 }
    }

    fn settings(&self, attempt: u32) -> DefaultSettings<f64> {
        let mut b = DefaultSettingsBuilder::default();
        b.verbose(false).max_threads(1).presolve_enable(false);
        match attempt {
            0 => b.max_iter(self.max_iter),
            1 => b
                .max_iter(self.max_iter * 3)
                .static_regularization_constant(1e-7)
                .equilibrate_max_iter(50),
            _ => b
                .max_iter(self.max_iter * 5)
                .direct_solve_method("qdldl".into())
                .equilibrate_enable(false)
                .tol_feas(1e-7)
                .tol_gap_abs(1e-7)
                .tol_gap_rel(1e-7),
        };
        b.build().expect("valid solver settings")
    }
}

struct Assembled {
    a: CscMatrix<f64>,
    b: Vec<f64>,
    q: Vec<f64>,
    cones: Vec<SupportedConeT<f64>>,
}

fn assemble(form: &StandardForm) -> Assembled {
    let (mut ri, mut ci, mut vv) = (Vec::new(), Vec::new(), Vec::new());
    let mut b = Vec::new();
    let mut cones = Vec::new();
    let mut push = |row: &AffineRow, sign: f64, b: &mut Vec<f64>| {
        let r = b.len();
        for &(c, v) in &row.terms {
            if v != 0.0 {
                ri.push(r);
                ci.push(c);
                vv.push(sign * v);
            }
        }
        b.push(-sign * row.constant);
    };
    for row in &form.eq {
        push(row, 1.0, &mut b);
    }
    if !form.eq.is_empty() {
        cones.push(ZeroConeT(form.eq.len()));
    }
    for row in &form.ineq {
        push(row, 1.0, &mut b);
    }
    if !form.ineq.is_empty() {
        cones.push(NonnegativeConeT(form.ineq.len()));
    }
    for soc in &form.socs {
        push(&soc.radius, -1.0, &mut b);
        for comp in &soc.components {
            push(comp, -1.0, &mut b);
        }
        cones.push(SecondOrderConeT(soc.components.len() + 1));
    }
    let m = b.len();
    Assembled {
        a: CscMatrix::new_from_triplets(m, form.n, ri, ci, vv),
        b,
        q: form.c.clone(),
        cones,
    }
}

fn run(form: &StandardForm, settings: DefaultSettings<f64>) -> (SolverStatus, Vec<f64>, f64, String) {
    let asm = assemble(form);
    let p = CscMatrix::zeros((form.n, form.n));
    match DefaultSolver::new(&p, &asm.q, &asm.a, &asm.b, &asm.cones, settings) {
        Ok(mut solver) => {
            solver.solve();
            let s = &solver.solution;
            (s.status, s.x.clone(), s.obj_val + form.offset, format!("{:?} after {} iterations", s.status, s.iterations))
        }
        Err(e) => (SolverStatus::NumericalError, Vec::new(), f64::NAN, format!("setup failed: {e:?}")),
    }
}

impl ContinuousBackend for ClarabelBackend {
    fn solve(&self, form: &StandardForm) -> BackendResult {
        let mut diag = Vec::new();
        for attempt in 0..3 {
            let (status, x, obj, d) = run(form, self.settings(attempt));
            diag.push(d);
            let st = match status {
                SolverStatus::Solved | SolverStatus::AlmostSolved => ContinuousStatus::Optimal,
                SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => ContinuousStatus::Infeasible,
                SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => ContinuousStatus::Unbounded,
                _ => continue,
            };
            return BackendResult {
                status: st,
                x: if st == ContinuousStatus::Optimal { x } else { Vec::new() },
                objective: obj,
                diagnostics: diag.join("; "),
            };
        }
        BackendResult {
            status: ContinuousStatus::Failed,
            x: Vec::new(),
            objective: f64::NAN,
            diagnostics: diag.join("; "),
        }
    }

    fn solve_batch(&self, forms: &[&StandardForm]) -> Vec<BackendResult> {
        match &self.pool {
            Some(pool) if forms.len() > 1 => pool.install(|| forms.par_iter().map(|f| self.solve(f)).collect()),
            _ => forms.iter().map(|f| self.solve(f)).collect(),
        }
    }
}

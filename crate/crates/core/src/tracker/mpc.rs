use nalgebra::{DMatrix, DVector, Matrix4, Matrix4x2, Vector2, Vector4};

use super::power::lipschitz_bound;
use super::{BodyModel, TrackerConfig, TrackerError};
use crate::planner::Trajectory;

/// `(px, py, vx, vy)`
pub type BodyState = Vector4<f64>;

/// Discrete point-mass dynamics `z+ = A z + B u`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearStep {
    pub a: Matrix4<f64>,
    pub b: Matrix4x2<f64>,
}

impl LinearStep {
    #[inline]
    pub fn apply(&self, z: &BodyState, u: &Vector2<f64>) -> BodyState {
        self.a * z + self.b * u
    }
}

/// Exact zero-order-hold discretization of the planar double integrator
/// driven by a horizontal force.
pub fn discretize_body(model: &BodyModel) -> LinearStep {
    let dt = model.dt;
    let m = model.mass;
    let mut a = Matrix4::identity();
    a[(0, 2)] = dt;
    a[(1, 3)] = dt;
    let mut b = Matrix4x2::zeros();
    b[(0, 0)] = dt * dt / (2.0 * m);
    b[(1, 1)] = dt * dt / (2.0 * m);
    b[(2, 0)] = dt / m;
    b[(3, 1)] = dt / m;
    LinearStep { a, b }
}

/// Reference states `(x, u)` of a planned trajectory: position and the
/// commanded velocity.
pub fn states_from_plan(traj: &Trajectory) -> Vec<BodyState> {
    traj.samples
        .iter()
        .map(|s| BodyState::new(s.x.x, s.x.y, s.u.x, s.u.y))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpcSolution {
    pub u0: Vector2<f64>,
    /// Stacked `(u_0, ..., u_{N-1})`.
    pub inputs: DVector<f64>,
    pub predicted: Vec<BodyState>,
    pub iterations: usize,
    pub converged: bool,
    pub cost: f64,
}

/// Condensed finite-horizon tracking problem
/// `min sum_k |x_{k+1} - r_{k+1}|_Q^2 + |u_k|_K^2` s.t. `|u| <= u_max`,
/// solved by projected gradient descent with step `1/L`.
#[derive(Debug, Clone)]
pub struct MpcSolver {
    step: LinearStep,
    cfg: TrackerConfig,
    /// `4N x 4`, block k is `A^(k+1)`.
    free: DMatrix<f64>,
    /// `4N x 2N`, block (k, j) is `A^(k-j) B` for `j <= k`.
    forced: DMatrix<f64>,
    q_diag: DVector<f64>,
    hessian: DMatrix<f64>,
    /// `2 Gamma^T Qbar`
    lin_map: DMatrix<f64>,
    inv_l: f64,
}

impl MpcSolver {
    pub fn new(model: &BodyModel, cfg: &TrackerConfig) -> Result<Self, TrackerError> {
        model.validate()?;
        cfg.validate()?;
        let n = cfg.horizon;
        let step = discretize_body(model);
        let mut free = DMatrix::zeros(4 * n, 4);
        let mut powers = Vec::with_capacity(n + 1);
        powers.push(Matrix4::identity());
        for k in 1..=n {
            powers.push(step.a * powers[k - 1]);
        }
        let mut forced = DMatrix::zeros(4 * n, 2 * n);
        for k in 0..n {
            free.view_mut((4 * k, 0), (4, 4)).copy_from(&powers[k + 1]);
            for j in 0..=k {
                let blk = powers[k - j] * step.b;
                forced.view_mut((4 * k, 2 * j), (4, 2)).copy_from(&blk);
            }
        }
        let q_diag = DVector::from_fn(4 * n, |i, _| cfg.q_weight[i % 4]);
        let k_diag = DVector::from_fn(2 * n, |i, _| cfg.k_weight[i % 2]);
        let mut weighted = forced.clone();
        for (mut row, q) in weighted.row_iter_mut().zip(q_diag.iter()) {
            row *= *q;
        }
        let lin_map = weighted.transpose() * 2.0;
        let hessian = (forced.transpose() * &weighted + DMatrix::from_diagonal(&k_diag)) * 2.0;
        let inv_l = 1.0 / lipschitz_bound(&hessian);
        Ok(Self {
            step,
            cfg: cfg.clone(),
            free,
            forced,
            q_diag,
            hessian,
            lin_map,
            inv_l,
        })
    }

    pub fn step_map(&self) -> &LinearStep {
        &self.step
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }

    fn stack_refs(&self, refs: &[BodyState]) -> Result<DVector<f64>, TrackerError> {
        let n = self.cfg.horizon;
        if refs.len() != n {
            return Err(TrackerError::DimensionMismatch(format!(
                "reference window has {} states, horizon is {n}",
                refs.len()
            )));
        }
        Ok(DVector::from_iterator(
            4 * n,
            refs.iter().flat_map(|r| r.iter().copied()),
        ))
    }

    /// Linear term `c` of the gradient `H U + c`, and the free response.
    fn linear_term(&self, z0: &BodyState, r: &DVector<f64>) -> (DVector<f64>, DVector<f64>) {
        let free_resp = &self.free * z0;
        let c = &self.lin_map * (&free_resp - r);
        (c, free_resp)
    }

    pub fn cost(
        &self,
        z0: &BodyState,
        refs: &[BodyState],
        inputs: &DVector<f64>,
    ) -> Result<f64, TrackerError> {
        let r = self.stack_refs(refs)?;
        Ok(self.cost_stacked(&(&self.free * z0), &r, inputs))
    }

    fn cost_stacked(&self, free_resp: &DVector<f64>, r: &DVector<f64>, u: &DVector<f64>) -> f64 {
        let e = free_resp + &self.forced * u - r;
        let state: f64 = e
            .iter()
            .zip(self.q_diag.iter())
            .map(|(e, q)| q * e * e)
            .sum();
        let input: f64 = u
            .iter()
            .enumerate()
            .map(|(i, v)| self.cfg.k_weight[i % 2] * v * v)
            .sum();
        state + input
    }

    fn project(&self, u: &mut DVector<f64>) {
        for (i, v) in u.iter_mut().enumerate() {
            let b = self.cfg.u_max[i % 2];
            *v = v.clamp(-b, b);
        }
    }

    pub fn solve(
        &self,
        z0: &BodyState,
        refs: &[BodyState],
        warm: Option<&DVector<f64>>,
    ) -> Result<MpcSolution, TrackerError> {
        self.solve_impl(z0, refs, warm, None)
    }

    /// Like [`solve`](Self::solve), also returning the cost after every
    /// iteration (first entry is the projected warm start).
    pub fn solve_traced(
        &self,
        z0: &BodyState,
        refs: &[BodyState],
        warm: Option<&DVector<f64>>,
    ) -> Result<(MpcSolution, Vec<f64>), TrackerError> {
        let mut trace = Vec::new();
        let sol = self.solve_impl(z0, refs, warm, Some(&mut trace))?;
        Ok((sol, trace))
    }

    fn solve_impl(
        &self,
        z0: &BodyState,
        refs: &[BodyState],
        warm: Option<&DVector<f64>>,
        mut trace: Option<&mut Vec<f64>>,
    ) -> Result<MpcSolution, TrackerError> {
        let n = self.cfg.horizon;
        let r = self.stack_refs(refs)?;
        let (c, free_resp) = self.linear_term(z0, &r);
        let mut u = match warm {
            Some(w) if w.len() == 2 * n => w.clone(),
            _ => DVector::zeros(2 * n),
        };
        self.project(&mut u);
        if let Some(t) = trace.as_deref_mut() {
            t.push(self.cost_stacked(&free_resp, &r, &u));
        }
        let mut iterations = 0;
        let mut converged = false;
        while iterations < self.cfg.solver_max_iters {
            let grad = &self.hessian * &u + &c;
            let mut next = &u - grad * self.inv_l;
            self.project(&mut next);
            let mapping = (&next - &u).norm() / self.inv_l;
            if mapping <= self.cfg.solver_tol {
                converged = true;
                break;
            }
            u = next;
            iterations += 1;
            if let Some(t) = trace.as_deref_mut() {
                t.push(self.cost_stacked(&free_resp, &r, &u));
            }
        }
        let x = &free_resp + &self.forced * &u;
        let predicted = (0..n)
            .map(|k| BodyState::from_iterator(x.rows(4 * k, 4).iter().copied()))
            .collect();
        Ok(MpcSolution {
            u0: Vector2::new(u[0], u[1]),
            cost: self.cost_stacked(&free_resp, &r, &u),
            inputs: u,
            predicted,
            iterations,
            converged,
        })
    }
}

/// One receding-horizon solve from a cold start.
pub fn mpc_step(
    model: &BodyModel,
    cfg: &TrackerConfig,
    z0: &BodyState,
    ref_window: &[BodyState],
) -> Result<MpcSolution, TrackerError> {
    MpcSolver::new(model, cfg)?.solve(z0, ref_window, None)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackingResult {
    pub states: Vec<BodyState>,
    /// Input computed at each sample; the last one is never applied.
    pub inputs: Vec<Vector2<f64>>,
    /// Position error against the reference at each sample.
    pub errors: Vec<f64>,
    pub rms_error: f64,
    pub unconverged_steps: usize,
}

/// Closed-loop rollout applying the first input of each solve. The window
/// at sample `i` is `reference[i+1 ..= i+N]`, padded with the final state.
pub fn track_reference(
    model: &BodyModel,
    cfg: &TrackerConfig,
    z0: &BodyState,
    reference: &[BodyState],
) -> Result<TrackingResult, TrackerError> {
    if reference.is_empty() {
        return Err(TrackerError::DimensionMismatch("empty reference".into()));
    }
    let solver = MpcSolver::new(model, cfg)?;
    let n = cfg.horizon;
    let last = reference[reference.len() - 1];
    let mut z = *z0;
    let mut warm: Option<DVector<f64>> = None;
    let mut result = TrackingResult {
        states: Vec::with_capacity(reference.len()),
        inputs: Vec::with_capacity(reference.len()),
        errors: Vec::with_capacity(reference.len()),
        rms_error: 0.0,
        unconverged_steps: 0,
    };
    for i in 0..reference.len() {
        let window: Vec<BodyState> = (1..=n)
            .map(|k| *reference.get(i + k).unwrap_or(&last))
            .collect();
        let sol = solver.solve(&z, &window, warm.as_ref())?;
        if !sol.converged {
            result.unconverged_steps += 1;
        }
        result.states.push(z);
        result.inputs.push(sol.u0);
        result.errors.push((z.xy() - reference[i].xy()).norm());
        z = solver.step.apply(&z, &sol.u0);
        let mut shifted = sol.inputs.clone();
        let len = shifted.len();
        shifted.as_mut_slice().copy_within(2.., 0);
        shifted[len - 2] = sol.inputs[len - 2];
        shifted[len - 1] = sol.inputs[len - 1];
        warm = Some(shifted);
    }
    let sq: f64 = result.errors.iter().map(|e| e * e).sum();
    result.rms_error = (sq / result.errors.len() as f64).sqrt();
    Ok(result)
}

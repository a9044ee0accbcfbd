//! Gauss-Newton single shooting with box-projected line search.
//!
//! The decision variables are the stacked wrenches `U_0..U_{N-1}`. States are
//! obtained by rolling the prediction model forward from `x0`, so every
//! iterate is dynamically feasible by construction. Stage Jacobians come from
//! central finite differences and are chained into the state sensitivities.

use nalgebra::{DMatrix, DVector, SMatrix, Vector6};
use serde::{Deserialize, Serialize};

use super::cost::{nmpc_cost, state_error, Mat12, NmpcParams};
use super::model::{step_vec, NmpcStateX, PayloadModel, Vec12, WrenchU};
use crate::math::GimbalDomainError;
use crate::planner::DesiredState;

type Mat12x6 = SMatrix<f64, 12, 6>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum NmpcError {
    #[error(transparent)]
    GimbalDomain(#[from] GimbalDomainError),
    #[error("reference has {got} samples, expected {expected}")]
    BadReference { expected: usize, got: usize },
    #[error("warm start has {got} inputs, expected {expected}")]
    BadWarmStart { expected: usize, got: usize },
    #[error("cost became non-finite")]
    Diverged,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NmpcSolution {
    pub x_seq: Vec<NmpcStateX>,
    pub u_seq: Vec<WrenchU>,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Cost of the starting point followed by every accepted iterate.
    pub cost_history: Vec<f64>,
}

/// States `X_0..X_N` obtained by applying `u_seq` from `x0`.
pub fn rollout(
    x0: &NmpcStateX,
    u_seq: &[WrenchU],
    model: &PayloadModel,
    dt: f64,
) -> Result<Vec<NmpcStateX>, GimbalDomainError> {
    let mut xs = Vec::with_capacity(u_seq.len() + 1);
    let mut x = x0.to_vector();
    xs.push(*x0);
    for u in u_seq {
        x = step_vec(&x, &u.to_vector(), model, dt)?;
        xs.push(NmpcStateX::from_vector(&x));
    }
    Ok(xs)
}

/// Previous solution advanced by one stage, repeating the last input.
pub fn shift_warm_start(u_seq: &[WrenchU]) -> Vec<WrenchU> {
    if u_seq.is_empty() {
        return Vec::new();
    }
    let mut out = u_seq[1..].to_vec();
    out.push(*u_seq.last().expect("non-empty"));
    out
}

/// Symmetric square-root factor `L` with `LᵀL = Q` for PSD `Q`.
fn sqrt_factor<const D: usize>(q: &SMatrix<f64, D, D>) -> SMatrix<f64, D, D> {
    let q = DMatrix::from_column_slice(D, D, q.as_slice());
    let eig = ((&q + q.transpose()) * 0.5).symmetric_eigen();
    let s = eig.eigenvalues.map(|l| l.max(0.0).sqrt());
    let l = DMatrix::from_diagonal(&s) * eig.eigenvectors.transpose();
    SMatrix::<f64, D, D>::from_column_slice(l.as_slice())
}

struct Problem<'a> {
    x0: Vec12,
    reference: &'a [DesiredState],
    model: &'a PayloadModel,
    params: &'a NmpcParams,
    u_des: Vector6<f64>,
    lx: Mat12,
    lxn: Mat12,
    lu: SMatrix<f64, 6, 6>,
}

impl<'a> Problem<'a> {
    fn n(&self) -> usize {
        self.params.horizon
    }

    fn unpack(&self, z: &DVector<f64>) -> Vec<Vector6<f64>> {
        (0..self.n()).map(|i| z.fixed_rows::<6>(6 * i).into_owned()).collect()
    }

    fn states(&self, us: &[Vector6<f64>]) -> Result<Vec<Vec12>, GimbalDomainError> {
        let mut xs = Vec::with_capacity(us.len() + 1);
        xs.push(self.x0);
        for u in us {
            let next = step_vec(xs.last().expect("non-empty"), u, self.model, self.params.dt_c)?;
            xs.push(next);
        }
        Ok(xs)
    }

    fn error(&self, x: &Vec12, i: usize) -> Vec12 {
        state_error(&NmpcStateX::from_vector(x), &self.reference[i])
    }

    fn weight(&self, i: usize) -> &Mat12 {
        if i == self.n() {
            &self.lxn
        } else {
            &self.lx
        }
    }

    fn residual(&self, xs: &[Vec12], us: &[Vector6<f64>]) -> DVector<f64> {
        let n = self.n();
        let mut r = DVector::zeros(12 * (n + 1) + 6 * n);
        for (i, x) in xs.iter().enumerate() {
            let ri = self.weight(i) * self.error(x, i);
            r.fixed_rows_mut::<12>(12 * i).copy_from(&ri);
        }
        for (i, u) in us.iter().enumerate() {
            let ri = self.lu * (self.u_des - u);
            r.fixed_rows_mut::<6>(12 * (n + 1) + 6 * i).copy_from(&ri);
        }
        r
    }

    fn cost_of(&self, z: &DVector<f64>) -> Result<f64, GimbalDomainError> {
        let us = self.unpack(z);
        let xs = self.states(&us)?;
        Ok(self.residual(&xs, &us).norm_squared())
    }

    /// Residual Jacobian with respect to the stacked inputs.
    fn jacobian(&self, xs: &[Vec12], us: &[Vector6<f64>]) -> Result<DMatrix<f64>, GimbalDomainError> {
        let n = self.n();
        let dt = self.params.dt_c;
        let mut a = Vec::with_capacity(n);
        let mut b = Vec::with_capacity(n);
        for i in 0..n {
            let mut ai = Mat12::zeros();
            for k in 0..12 {
                let h = 1e-6 * xs[i][k].abs().max(1.0);
                let mut xp = xs[i];
                let mut xm = xs[i];
                xp[k] += h;
                xm[k] -= h;
                let d = (step_vec(&xp, &us[i], self.model, dt)? - step_vec(&xm, &us[i], self.model, dt)?) / (2.0 * h);
                ai.set_column(k, &d);
            }
            let mut bi = Mat12x6::zeros();
            for k in 0..6 {
                let h = 1e-6 * us[i][k].abs().max(1.0);
                let mut up = us[i];
                let mut um = us[i];
                up[k] += h;
                um[k] -= h;
                let d = (step_vec(&xs[i], &up, self.model, dt)? - step_vec(&xs[i], &um, self.model, dt)?) / (2.0 * h);
                bi.set_column(k, &d);
            }
            a.push(ai);
            b.push(bi);
        }
        // derivative of the weighted error with respect to the state at each stage
        let mut e = Vec::with_capacity(n + 1);
        for (i, x) in xs.iter().enumerate() {
            let mut ei = Mat12::zeros();
            for k in 0..12 {
                let h = 1e-6 * x[k].abs().max(1.0);
                let mut xp = *x;
                let mut xm = *x;
                xp[k] += h;
                xm[k] -= h;
                ei.set_column(k, &((self.error(&xp, i) - self.error(&xm, i)) / (2.0 * h)));
            }
            e.push(self.weight(i) * ei);
        }

        let mut jac = DMatrix::zeros(12 * (n + 1) + 6 * n, 6 * n);
        for j in 0..n {
            let mut s = b[j];
            for i in (j + 1)..=n {
                if i > j + 1 {
                    s = a[i - 1] * s;
                }
                let block = e[i] * s;
                jac.fixed_view_mut::<12, 6>(12 * i, 6 * j).copy_from(&block);
            }
            jac.fixed_view_mut::<6, 6>(12 * (n + 1) + 6 * j, 6 * j).copy_from(&(-self.lu));
        }
        Ok(jac)
    }
}

fn build_problem<'a>(
    x0: &NmpcStateX,
    reference: &'a [DesiredState],
    model: &'a PayloadModel,
    params: &'a NmpcParams,
) -> Result<Problem<'a>, NmpcError> {
    if reference.len() != params.horizon + 1 {
        return Err(NmpcError::BadReference { expected: params.horizon + 1, got: reference.len() });
    }
    Ok(Problem {
        x0: x0.to_vector(),
        reference,
        model,
        params,
        u_des: model.hover_wrench().to_vector(),
        lx: sqrt_factor(&params.q_x),
        lxn: sqrt_factor(&params.q_xn),
        lu: sqrt_factor(&params.q_u),
    })
}

fn stack(u_seq: &[WrenchU]) -> DVector<f64> {
    let mut z = DVector::zeros(6 * u_seq.len());
    for (i, u) in u_seq.iter().enumerate() {
        z.fixed_rows_mut::<6>(6 * i).copy_from(&u.to_vector());
    }
    z
}

/// Gradient of [`nmpc_cost`] with respect to the stacked inputs, `2 Jᵀ r`.
pub fn cost_gradient(
    x0: &NmpcStateX,
    reference: &[DesiredState],
    u_seq: &[WrenchU],
    model: &PayloadModel,
    params: &NmpcParams,
) -> Result<DVector<f64>, NmpcError> {
    let prob = build_problem(x0, reference, model, params)?;
    let z = stack(u_seq);
    let us = prob.unpack(&z);
    let xs = prob.states(&us)?;
    let jac = prob.jacobian(&xs, &us)?;
    Ok(jac.transpose() * prob.residual(&xs, &us) * 2.0)
}

fn project(z: &DVector<f64>, params: &NmpcParams) -> DVector<f64> {
    let mut out = z.clone();
    for i in 0..params.horizon {
        let u = params.bounds.project(&z.fixed_rows::<6>(6 * i).into_owned());
        out.fixed_rows_mut::<6>(6 * i).copy_from(&u);
    }
    out
}

/// Minimises the tracking cost over the horizon subject to the prediction model
/// and the wrench box. `warm_start` defaults to the hover wrench.
pub fn solve_nmpc(
    x0: &NmpcStateX,
    reference: &[DesiredState],
    warm_start: Option<&[WrenchU]>,
    model: &PayloadModel,
    params: &NmpcParams,
) -> Result<NmpcSolution, NmpcError> {
    let prob = build_problem(x0, reference, model, params)?;
    let n = params.horizon;
    let init: Vec<WrenchU> = match warm_start {
        Some(w) if w.len() == n => w.to_vec(),
        Some(w) => return Err(NmpcError::BadWarmStart { expected: n, got: w.len() }),
        None => vec![model.hover_wrench(); n],
    };
    let lo = &params.bounds.lower;
    let hi = &params.bounds.upper;

    // fall back to hover, then to a wrench that brakes the body rates, when the
    // warm start's rollout leaves the gimbal-safe domain
    let brake = WrenchU {
        force: model.hover_wrench().force,
        moment: -(model.inertia * x0.omega) / (0.25 * n as f64 * params.dt_c),
    };
    let guesses = [init, vec![model.hover_wrench(); n], vec![brake; n]];
    let mut z = project(&stack(&guesses[0]), params);
    let mut cost = prob.cost_of(&z);
    for guess in &guesses[1..] {
        if cost.is_ok() {
            break;
        }
        z = project(&stack(guess), params);
        cost = prob.cost_of(&z);
    }
    let mut cost = cost?;
    if !cost.is_finite() {
        return Err(NmpcError::Diverged);
    }
    let mut history = vec![cost];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < params.max_iters {
        iterations += 1;
        let us = prob.unpack(&z);
        let xs = prob.states(&us)?;
        let r = prob.residual(&xs, &us);
        let jac = prob.jacobian(&xs, &us)?;
        let g = jac.transpose() * &r;
        let h = jac.transpose() * &jac;

        // variables pinned at a bound with the gradient pushing outward stay fixed
        let free: Vec<usize> = (0..6 * n)
            .filter(|&k| {
                let (l, u) = (lo[k % 6], hi[k % 6]);
                !((z[k] <= l && g[k] > 0.0) || (z[k] >= u && g[k] < 0.0))
            })
            .collect();
        if free.is_empty() {
            converged = true;
            break;
        }
        let m = free.len();
        let mut hf = DMatrix::zeros(m, m);
        let mut gf = DVector::zeros(m);
        for (a, &ka) in free.iter().enumerate() {
            gf[a] = g[ka];
            for (b, &kb) in free.iter().enumerate() {
                hf[(a, b)] = h[(ka, kb)];
            }
        }
        let damping = 1e-10 * (1.0 + hf.diagonal().max());
        for a in 0..m {
            hf[(a, a)] += damping;
        }
        let Some(chol) = hf.cholesky() else {
            return Err(NmpcError::Diverged);
        };
        let step_f = chol.solve(&(-gf));
        let mut step = DVector::zeros(6 * n);
        for (a, &k) in free.iter().enumerate() {
            step[k] = step_f[a];
        }

        let mut alpha = 1.0;
        let mut accepted = None;
        for _ in 0..30 {
            let cand = project(&(&z + &step * alpha), params);
            // a step leaving the gimbal-safe domain counts as no decrease
            let c = prob.cost_of(&cand).unwrap_or(f64::INFINITY);
            let predicted = 2.0 * g.dot(&(&cand - &z));
            if c.is_finite() && c < cost && c <= cost + 1e-4 * predicted {
                accepted = Some((cand, c));
                break;
            }
            alpha *= 0.5;
        }
        let Some((cand, c)) = accepted else {
            // no decrease available to working precision
            converged = true;
            break;
        };
        let dz = (&cand - &z).norm();
        let dc = cost - c;
        z = cand;
        cost = c;
        history.push(cost);
        if dc < params.cost_tol || dz < params.step_tol {
            converged = true;
            break;
        }
    }

    let u_seq: Vec<WrenchU> = prob.unpack(&z).iter().map(WrenchU::from_vector).collect();
    let x_seq = rollout(x0, &u_seq, model, params.dt_c)?;
    let cost = nmpc_cost(&x_seq, &u_seq, reference, &model.hover_wrench(), params);
    if !cost.is_finite() {
        return Err(NmpcError::Diverged);
    }
    Ok(NmpcSolution { x_seq, u_seq, cost, iterations, converged, cost_history: history })
}

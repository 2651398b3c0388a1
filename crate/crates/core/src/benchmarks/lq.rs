use std::io::Write;

use statrs::distribution::{ContinuousCDF, Normal};

use crate::dynamics::{ActionSet, ClosedSet, Coefficients, FnStrategy, ModelSpec, Observation};
use crate::error::{Error, Result};
use crate::measures::{uniform_grid, DiscreteMeasure, MeasureFlow};
use crate::scalar::Real;

/// Scalar linear-quadratic game.
///
/// `b = a·x + abar·mean(ν) + c·γ`, `σ = s`,
/// `f = ½γ² + ½q(x − kappa·mean(ν))²`, `F = ½q_t(x − kappa_t·mean(ν))²`,
/// initial law `N(m0_mean, m0_var)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LqParams {
    pub a: f64,
    pub abar: f64,
    pub c: f64,
    pub s: f64,
    pub q: f64,
    pub kappa: f64,
    pub q_t: f64,
    pub kappa_t: f64,
    pub m0_mean: f64,
    pub m0_var: f64,
    pub horizon: f64,
}

impl Default for LqParams {
    fn default() -> Self {
        Self {
            a: -0.2,
            abar: 0.3,
            c: 1.0,
            s: 0.5,
            q: 1.5,
            kappa: 1.0,
            q_t: 1.0,
            kappa_t: 1.0,
            m0_mean: 1.0,
            m0_var: 0.25,
            horizon: 1.0,
        }
    }
}

impl LqParams {
    /// All coefficients zero except a unit horizon.
    pub fn zero() -> Self {
        Self {
            a: 0.0,
            abar: 0.0,
            c: 0.0,
            s: 0.0,
            q: 0.0,
            kappa: 0.0,
            q_t: 0.0,
            kappa_t: 0.0,
            m0_mean: 0.0,
            m0_var: 0.0,
            horizon: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            self.a,
            self.abar,
            self.c,
            self.s,
            self.q,
            self.kappa,
            self.q_t,
            self.kappa_t,
            self.m0_mean,
            self.m0_var,
            self.horizon,
        ];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite LQ parameter".into()));
        }
        for (name, v) in [("q", self.q), ("q_t", self.q_t), ("s", self.s), ("m0_var", self.m0_var)] {
            if v < 0.0 {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be nonnegative")));
            }
        }
        if self.horizon <= 0.0 {
            return Err(Error::InvalidParameter(format!("horizon = {}", self.horizon)));
        }
        Ok(())
    }

    /// Growth constant read off the coefficient magnitudes.
    pub fn growth(&self) -> f64 {
        [
            self.a.abs(),
            self.abar.abs(),
            self.c.abs(),
            self.s,
            0.5,
            self.q,
            self.q * self.kappa * self.kappa,
            self.q_t,
            self.q_t * self.kappa_t * self.kappa_t,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    /// Lipschitz constant read off the coefficient magnitudes.
    pub fn lipschitz(&self) -> f64 {
        let run = 0.5 * self.q * self.kappa.abs().max(1.0).powi(2);
        let term = 0.5 * self.q_t * self.kappa_t.abs().max(1.0).powi(2);
        [self.a.abs(), self.abar.abs(), run + term, 0.5]
            .into_iter()
            .fold(0.0, f64::max)
    }
}

/// Coefficients of the linear-quadratic model in the working precision.
#[derive(Debug, Clone, Copy)]
pub struct LqCoefficients<T> {
    a: T,
    abar: T,
    c: T,
    s: T,
    q: T,
    kappa: T,
    q_t: T,
    kappa_t: T,
}

impl<T: Real> LqCoefficients<T> {
    pub fn new(p: &LqParams) -> Self {
        Self {
            a: T::of(p.a),
            abar: T::of(p.abar),
            c: T::of(p.c),
            s: T::of(p.s),
            q: T::of(p.q),
            kappa: T::of(p.kappa),
            q_t: T::of(p.q_t),
            kappa_t: T::of(p.kappa_t),
        }
    }
}

impl<T: Real> Coefficients<T> for LqCoefficients<T> {
    #[inline]
    fn drift(&self, _: T, x: &[T], nu: &DiscreteMeasure<T>, gamma: &[T], out: &mut [T]) {
        out[0] = self.a * x[0] + self.abar * nu.mean()[0] + self.c * gamma[0];
    }

    #[inline]
    fn diffusion(&self, _: T, _: &[T], _: &DiscreteMeasure<T>, out: &mut [T]) {
        out[0] = self.s;
    }

    #[inline]
    fn running_cost(&self, _: T, x: &[T], nu: &DiscreteMeasure<T>, gamma: &[T]) -> T {
        let half = T::of(0.5);
        let dev = x[0] - self.kappa * nu.mean()[0];
        half * gamma[0] * gamma[0] + half * self.q * dev * dev
    }

    #[inline]
    fn terminal_cost(&self, x: &[T], nu: &DiscreteMeasure<T>) -> T {
        let dev = x[0] - self.kappa_t * nu.mean()[0];
        T::of(0.5) * self.q_t * dev * dev
    }
}

/// Linear-quadratic model with `Γ = ℝ`, `c₀ = ¼`, `r₀ = 1`, `γ₀ = 0`.
pub fn lq_model<T: Real>(params: &LqParams) -> Result<ModelSpec<T>> {
    params.validate()?;
    let set = ActionSet::Closed(ClosedSet::whole(1, T::of(0.25), T::one()));
    ModelSpec::new("lq", (1, 1, 1), T::of(params.horizon), set, LqCoefficients::new(params))?
        .with_constants(T::of(params.growth()), T::of(params.lipschitz()))
        .with_gamma0(vec![T::zero()])
}

/// `b = −x`, `σ = 1`, `f = ½γ² + ½x²`, `F = ½x²` on `[0, 1]`. Uncontrolled it
/// is the Ornstein–Uhlenbeck process.
pub fn ou_model<T: Real>() -> ModelSpec<T> {
    let p = LqParams {
        a: -1.0,
        abar: 0.0,
        c: 1.0,
        s: 1.0,
        q: 1.0,
        kappa: 0.0,
        q_t: 1.0,
        kappa_t: 0.0,
        m0_mean: 0.0,
        m0_var: 0.0,
        horizon: 1.0,
    };
    let mut model = lq_model(&p).expect("valid OU parameters");
    model.name = "ou".into();
    model
}

/// `n` equally weighted atoms at the Gaussian quantiles `(i − ½)/n`.
pub fn lq_initial_measure<T: Real>(params: &LqParams, n: usize) -> Result<DiscreteMeasure<T>> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    let sd = params.m0_var.sqrt();
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let atoms = (1..=n)
        .map(|i| T::of(params.m0_mean + sd * normal.inverse_cdf((i as f64 - 0.5) / n as f64)))
        .collect();
    DiscreteMeasure::uniform(1, atoms)
}

/// Solution of the linear-quadratic mean-field game on a fine time grid.
///
/// `V(t, x) = P(t)x² + R(t)x + C(t)`, optimal feedback
/// `γ = g(t)x + offset(t)` with `g = −2cP`, `offset = −cR`, and mean flow `z̄`.
#[derive(Debug, Clone, PartialEq)]
pub struct LqOracle {
    pub params: LqParams,
    pub times: Vec<f64>,
    pub p: Vec<f64>,
    pub r: Vec<f64>,
    pub c: Vec<f64>,
    pub zbar: Vec<f64>,
    /// Fixed-point updates performed.
    pub sweeps: usize,
    /// Last `sup|z̄ change|`.
    pub change: f64,
}

const MAX_SWEEPS: usize = 500;
const TOLERANCE: f64 = 1e-10;
const DAMPING: f64 = 0.5;

fn hermite_mid(y0: f64, y1: f64, d0: f64, d1: f64, dt: f64) -> f64 {
    0.5 * (y0 + y1) + dt * (d0 - d1) / 8.0
}

/// Riccati system for `(P, R, C)` as time derivatives, given the mean `m`.
fn riccati_rhs(p: &LqParams, y: [f64; 3], m: f64) -> [f64; 3] {
    let [pp, r, _] = y;
    let c2 = p.c * p.c;
    [
        -(2.0 * p.a * pp - 2.0 * c2 * pp * pp + 0.5 * p.q),
        -(p.a * r + 2.0 * p.abar * m * pp - 2.0 * c2 * pp * r - p.q * p.kappa * m),
        -(p.abar * m * r - 0.5 * c2 * r * r + p.s * p.s * pp + 0.5 * p.q * p.kappa * p.kappa * m * m),
    ]
}

fn mean_rhs(p: &LqParams, z: f64, pp: f64, r: f64) -> f64 {
    (p.a + p.abar - 2.0 * p.c * p.c * pp) * z - p.c * p.c * r
}

fn add(y: [f64; 3], k: [f64; 3], h: f64) -> [f64; 3] {
    [y[0] + h * k[0], y[1] + h * k[1], y[2] + h * k[2]]
}

/// Backward sweep: `(P, R, C)` and their time derivatives on the grid.
#[allow(clippy::type_complexity)]
fn backward(p: &LqParams, h: f64, z: &[f64], dz: &[f64]) -> (Vec<[f64; 3]>, Vec<[f64; 3]>) {
    let n = z.len() - 1;
    let mut y = vec![[0.0; 3]; n + 1];
    let mut dy = vec![[0.0; 3]; n + 1];
    let mt = z[n];
    y[n] = [0.5 * p.q_t, -p.q_t * p.kappa_t * mt, 0.5 * p.q_t * p.kappa_t * p.kappa_t * mt * mt];
    dy[n] = riccati_rhs(p, y[n], mt);
    for j in (0..n).rev() {
        let mid = hermite_mid(z[j], z[j + 1], dz[j], dz[j + 1], h);
        let yj = y[j + 1];
        let k1 = riccati_rhs(p, yj, z[j + 1]);
        let k2 = riccati_rhs(p, add(yj, k1, -0.5 * h), mid);
        let k3 = riccati_rhs(p, add(yj, k2, -0.5 * h), mid);
        let k4 = riccati_rhs(p, add(yj, k3, -h), z[j]);
        y[j] = [0, 1, 2].map(|i| yj[i] - h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        dy[j] = riccati_rhs(p, y[j], z[j]);
    }
    (y, dy)
}

/// Forward sweep of the mean ODE under the induced feedback.
fn forward(p: &LqParams, h: f64, y: &[[f64; 3]], dy: &[[f64; 3]]) -> (Vec<f64>, Vec<f64>) {
    let n = y.len() - 1;
    let mut z = vec![p.m0_mean; n + 1];
    let mut dz = vec![0.0; n + 1];
    dz[0] = mean_rhs(p, z[0], y[0][0], y[0][1]);
    for j in 0..n {
        let pm = hermite_mid(y[j][0], y[j + 1][0], dy[j][0], dy[j + 1][0], h);
        let rm = hermite_mid(y[j][1], y[j + 1][1], dy[j][1], dy[j + 1][1], h);
        let k1 = mean_rhs(p, z[j], y[j][0], y[j][1]);
        let k2 = mean_rhs(p, z[j] + 0.5 * h * k1, pm, rm);
        let k3 = mean_rhs(p, z[j] + 0.5 * h * k2, pm, rm);
        let k4 = mean_rhs(p, z[j] + h * k3, y[j + 1][0], y[j + 1][1]);
        z[j + 1] = z[j] + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        dz[j + 1] = mean_rhs(p, z[j + 1], y[j + 1][0], y[j + 1][1]);
    }
    (z, dz)
}

/// Solves the coupled Riccati / mean-consistency system by damped fixed-point
/// sweeps with fixed-step RK4 on `ode_steps` steps.
///
/// The first update is undamped, later ones average old and new mean flows.
pub fn lq_oracle(params: &LqParams, ode_steps: usize) -> Result<LqOracle> {
    params.validate()?;
    if ode_steps < 1000 {
        return Err(Error::InvalidParameter(format!("ode_steps = {ode_steps} < 1000")));
    }
    let n = ode_steps;
    let h = params.horizon / n as f64;
    let times: Vec<f64> = uniform_grid(params.horizon, n);
    let growth = params.a + params.abar;
    let mut z: Vec<f64> = times.iter().map(|t| params.m0_mean * (growth * t).exp()).collect();
    let mut dz: Vec<f64> = z.iter().map(|v| growth * v).collect();

    let mut change = f64::INFINITY;
    for sweep in 0..=MAX_SWEEPS {
        let (y, dy) = backward(params, h, &z, &dz);
        let (zn, dzn) = forward(params, h, &y, &dy);
        change = z
            .iter()
            .zip(&zn)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        if !change.is_finite() {
            break;
        }
        if change <= TOLERANCE {
            return Ok(LqOracle {
                params: *params,
                times,
                p: y.iter().map(|v| v[0]).collect(),
                r: y.iter().map(|v| v[1]).collect(),
                c: y.iter().map(|v| v[2]).collect(),
                zbar: zn,
                sweeps: sweep,
                change,
            });
        }
        if sweep == MAX_SWEEPS {
            break;
        }
        let lambda = if sweep == 0 { 1.0 } else { DAMPING };
        for j in 0..=n {
            z[j] = (1.0 - lambda) * z[j] + lambda * zn[j];
            dz[j] = (1.0 - lambda) * dz[j] + lambda * dzn[j];
        }
    }
    Err(Error::OracleNotConverged {
        sweeps: MAX_SWEEPS,
        change,
    })
}

impl LqOracle {
    fn interp(&self, series: &[f64], t: f64) -> f64 {
        let n = self.times.len() - 1;
        let u = (t / self.params.horizon * n as f64).clamp(0.0, n as f64);
        let j = (u.floor() as usize).min(n - 1);
        let w = u - j as f64;
        if w == 0.0 {
            return series[j];
        }
        (1.0 - w) * series[j] + w * series[j + 1]
    }

    /// Feedback gain `g(t) = −2cP(t)`.
    pub fn gain_at(&self, t: f64) -> f64 {
        -2.0 * self.params.c * self.interp(&self.p, t)
    }

    /// Feedback offset `−cR(t)`.
    pub fn offset_at(&self, t: f64) -> f64 {
        -self.params.c * self.interp(&self.r, t)
    }

    pub fn zbar_at(&self, t: f64) -> f64 {
        self.interp(&self.zbar, t)
    }

    /// `V(t, x)`.
    pub fn value_at(&self, t: f64, x: f64) -> f64 {
        self.interp(&self.p, t) * x * x + self.interp(&self.r, t) * x + self.interp(&self.c, t)
    }

    /// `∫ V(0, x) 𝔪₀(dx)` for the Gaussian initial law.
    pub fn mean_initial_value(&self) -> f64 {
        let m = self.params.m0_mean;
        self.p[0] * (self.params.m0_var + m * m) + self.r[0] * m + self.c[0]
    }

    /// Dirac flow `δ_{z̄(t_j)}` on a uniform grid of `steps` steps. Enough
    /// for the benchmark, whose coefficients see the law only through its mean.
    pub fn mean_flow<T: Real>(&self, steps: usize) -> Result<MeasureFlow<T>> {
        let grid = uniform_grid(self.params.horizon, steps);
        let path: Vec<Vec<T>> = grid.iter().map(|&t| vec![T::of(self.zbar_at(t))]).collect();
        MeasureFlow::dirac_path(T::of(self.params.horizon), &path)
    }

    /// Full-information strategy `γ = g(t)·X_i + offset(t)`.
    pub fn feedback_strategy<T: Real>(&self) -> FnStrategy<T> {
        let oracle = self.clone();
        FnStrategy::full("lq-oracle-feedback", move |obs: &Observation<'_, T>, out: &mut [T]| {
            let states = obs.states.expect("full-information observation");
            let x = states[obs.player];
            let t = obs.t.as_f64();
            out[0] = T::of(oracle.gain_at(t)) * x + T::of(oracle.offset_at(t));
        })
    }

    /// Exact expected cost of every player in the `N`-player Euler chain on
    /// `steps` steps when all players use [`LqOracle::feedback_strategy`] and
    /// start from the given deterministic states.
    ///
    /// Writing `x_i = m + e_i` with `m` the empirical mean, the deviations and
    /// the mean are independent Gaussians whose first two moments follow a
    /// closed linear recursion.
    pub fn euler_chain_costs(&self, initials: &[f64], steps: usize) -> Vec<f64> {
        let p = &self.params;
        let n = initials.len() as f64;
        let dt = p.horizon / steps as f64;
        let xbar = initials.iter().sum::<f64>() / n;
        let mut e_mean: Vec<f64> = initials.iter().map(|x| x - xbar).collect();
        let mut e_var = 0.0;
        let (mut m_mean, mut m_var) = (xbar, 0.0);
        let mut costs = vec![0.0; initials.len()];
        let grid = uniform_grid(p.horizon, steps);
        for &t in grid.iter().take(steps) {
            let (g, o) = (self.gain_at(t), self.offset_at(t));
            let m2 = m_var + m_mean * m_mean;
            let gm_o = g * m_mean + o;
            let gm_o_sq = g * g * m2 + 2.0 * g * o * m_mean + o * o;
            for (cost, &em) in costs.iter_mut().zip(&e_mean) {
                let e2 = em * em + e_var;
                let gamma_sq = g * g * e2 + gm_o_sq + 2.0 * g * em * gm_o;
                let dev_sq = e2 + (1.0 - p.kappa).powi(2) * m2 + 2.0 * (1.0 - p.kappa) * em * m_mean;
                *cost += dt * (0.5 * gamma_sq + 0.5 * p.q * dev_sq);
            }
            let alpha = 1.0 + (p.a + p.c * g) * dt;
            let beta = p.abar * dt;
            let delta = p.c * o * dt;
            e_mean.iter_mut().for_each(|e| *e *= alpha);
            e_var = alpha * alpha * e_var + p.s * p.s * dt * (1.0 - 1.0 / n);
            m_mean = (alpha + beta) * m_mean + delta;
            m_var = (alpha + beta).powi(2) * m_var + p.s * p.s * dt / n;
        }
        let m2 = m_var + m_mean * m_mean;
        for (cost, &em) in costs.iter_mut().zip(&e_mean) {
            let e2 = em * em + e_var;
            let dev_sq = e2 + (1.0 - p.kappa_t).powi(2) * m2 + 2.0 * (1.0 - p.kappa_t) * em * m_mean;
            *cost += 0.5 * p.q_t * dev_sq;
        }
        costs
    }

    /// Writes `t,P,g,zbar` on the oracle grid.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "P", "g", "zbar"])?;
        for j in 0..self.times.len() {
            let g = -2.0 * self.params.c * self.p[j];
            w.write_record([
                self.times[j].to_string(),
                self.p[j].to_string(),
                g.to_string(),
                self.zbar[j].to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn no_state_cost_means_no_control() {
        let p = LqParams {
            q: 0.0,
            q_t: 0.0,
            ..LqParams::default()
        };
        let o = lq_oracle(&p, 2000).unwrap();
        assert!(o.p.iter().all(|&v| v == 0.0));
        assert!((0..=10).all(|k| o.gain_at(k as f64 / 10.0) == 0.0));
        for (t, z) in o.times.iter().zip(&o.zbar) {
            let exact = p.m0_mean * ((p.a + p.abar) * t).exp();
            assert!((z - exact).abs() < 1e-12, "{z} vs {exact}");
        }
        assert!(o.value_at(0.0, 1.3).abs() < 1e-15);
    }

    #[test]
    fn decoupled_converges_after_one_update() {
        let p = LqParams {
            abar: 0.0,
            kappa: 0.0,
            kappa_t: 0.0,
            ..LqParams::default()
        };
        let o = lq_oracle(&p, 2000).unwrap();
        assert_eq!(o.sweeps, 1);
    }

    #[test]
    fn terminal_and_initial_conditions() {
        let p = LqParams::default();
        let o = lq_oracle(&p, 4000).unwrap();
        assert_eq!(*o.p.last().unwrap(), 0.5 * p.q_t);
        assert_eq!(o.zbar[0], p.m0_mean);
    }

    #[test]
    fn rejects_negative_weights() {
        let p = LqParams {
            q: -1.0,
            ..LqParams::default()
        };
        assert!(lq_oracle(&p, 2000).is_err());
        assert!(lq_model::<f64>(&p).is_err());
    }

    #[test]
    fn quantile_sample_is_symmetric() {
        let p = LqParams::default();
        let m = lq_initial_measure::<f64>(&p, 8).unwrap();
        let mean = m.mean()[0];
        assert!((mean - p.m0_mean).abs() < 1e-12);
        assert!((m.atom(0)[0] - p.m0_mean + m.atom(7)[0] - p.m0_mean).abs() < 1e-12);
    }
}

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::model::{ActionSet, ModelSpec};
use crate::measures::{wasserstein2, DiscreteMeasure};
use crate::rng::{normal, substream, uniform, Purpose};
use crate::scalar::{norm, sq_dist, sq_norm, Real};

/// One sampled check: the largest observed ratio against the declared bound.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionCheck {
    pub name: &'static str,
    pub declared: f64,
    pub observed: f64,
    pub samples: usize,
    pub flagged: bool,
}

/// Sampled evidence for the standing assumptions. A clean report does not
/// prove them.
#[derive(Debug, Clone, PartialEq)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
}

impl AssumptionReport {
    pub fn flags(&self) -> Vec<&AssumptionCheck> {
        self.checks.iter().filter(|c| c.flagged).collect()
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| !c.flagged)
    }

    pub fn check(&self, name: &str) -> Option<&AssumptionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Tracker {
    name: &'static str,
    declared: f64,
    /// Upper bounds flag when exceeded, lower bounds when undershot.
    lower: bool,
    observed: f64,
    samples: usize,
}

impl Tracker {
    fn upper(name: &'static str, declared: f64) -> Self {
        Self {
            name,
            declared,
            lower: false,
            observed: 0.0,
            samples: 0,
        }
    }

    fn lower(name: &'static str, declared: f64) -> Self {
        Self {
            name,
            declared,
            lower: true,
            observed: f64::INFINITY,
            samples: 0,
        }
    }

    fn push(&mut self, value: f64) {
        if value.is_nan() {
            self.observed = if self.lower { f64::NEG_INFINITY } else { f64::INFINITY };
        } else if self.lower {
            self.observed = self.observed.min(value);
        } else {
            self.observed = self.observed.max(value);
        }
        self.samples += 1;
    }

    fn finish(self) -> AssumptionCheck {
        let slack = 1e-9 * self.declared.abs() + 1e-12;
        let flagged = if self.lower {
            self.samples > 0 && self.observed < self.declared - slack
        } else {
            self.observed > self.declared + slack
        };
        AssumptionCheck {
            name: self.name,
            declared: self.declared,
            observed: if self.samples == 0 { 0.0 } else { self.observed },
            samples: self.samples,
            flagged,
        }
    }
}

fn sample_action<T: Real>(set: &ActionSet<T>, fallback: &[T], scale: f64, rng: &mut ChaCha8Rng) -> Vec<T> {
    match set {
        ActionSet::CompactBox { lo, hi } => lo
            .iter()
            .zip(hi)
            .map(|(&l, &h)| l + (h - l) * uniform::<T, _>(rng))
            .collect(),
        ActionSet::Closed(s) => {
            let mut out = vec![T::zero(); s.dim];
            for _ in 0..64 {
                let z: Vec<T> = (0..s.dim).map(|_| normal::<T, _>(rng) * T::of(scale)).collect();
                if s.contains(&z) {
                    return z;
                }
                if s.project(&z, &mut out) && s.contains(&out) {
                    return out;
                }
            }
            fallback.to_vec()
        }
    }
}

fn sample_measure<T: Real>(d: usize, rng: &mut ChaCha8Rng) -> DiscreteMeasure<T> {
    let m = rng.random_range(1..=6usize);
    let shift: Vec<T> = (0..d).map(|_| normal::<T, _>(rng)).collect();
    let atoms: Vec<T> = (0..m * d)
        .map(|k| shift[k % d] + normal::<T, _>(rng) * T::of(1.5))
        .collect();
    let raw: Vec<T> = (0..m).map(|_| T::of(0.1) + uniform::<T, _>(rng)).collect();
    let total: T = raw.iter().copied().sum();
    let weights = raw.iter().map(|&w| w / total).collect();
    DiscreteMeasure::new(d, atoms, weights).unwrap_or_else(|_| DiscreteMeasure::uniform(d, vec![T::zero(); d]).expect("dirac"))
}

fn perturb_measure<T: Real>(nu: &DiscreteMeasure<T>, scale: T, rng: &mut ChaCha8Rng) -> DiscreteMeasure<T> {
    let atoms = nu.atoms().iter().map(|&a| a + normal::<T, _>(rng) * scale).collect();
    DiscreteMeasure::new(nu.dim(), atoms, nu.weights().to_vec()).unwrap_or_else(|_| nu.clone())
}

/// Samples states, measures, actions and times and compares difference and
/// growth quotients of the coefficients against the model's declared `K`, `L`
/// and coercivity constants.
pub fn validate_assumptions<T: Real>(model: &ModelSpec<T>, seed: u64, n_samples: usize) -> AssumptionReport {
    let (d, d1) = (model.d, model.d1);
    let k = model.growth.as_f64();
    let l = model.lipschitz.as_f64();
    let mut rng = substream(seed, Purpose::Validation, 0);

    let mut f_nonneg = Tracker::lower("running cost nonnegative", 0.0);
    let mut terminal_nonneg = Tracker::lower("terminal cost nonnegative", 0.0);
    let mut drift_growth = Tracker::upper("drift growth", k);
    let mut diffusion_growth = Tracker::upper("diffusion growth", k);
    let mut drift_lip = Tracker::upper("drift Lipschitz", l);
    let mut diffusion_lip = Tracker::upper("diffusion Lipschitz", l);
    let mut cost_lip = Tracker::upper("cost local Lipschitz", l);
    let mut cost_growth = Tracker::upper("cost growth", k);
    let mut coercivity = Tracker::lower("coercivity", 1.0);

    let mut b = vec![T::zero(); d];
    let mut bt = vec![T::zero(); d];
    let mut s = vec![T::zero(); d * d1];
    let mut st = vec![T::zero(); d * d1];

    for n in 0..n_samples.max(1) {
        let t = model.horizon * uniform::<T, _>(&mut rng);
        let x_scale = T::of([0.5, 2.0, 6.0][n % 3]);
        let x: Vec<T> = (0..d).map(|_| normal::<T, _>(&mut rng) * x_scale).collect();
        let nu = sample_measure::<T>(d, &mut rng);
        let gamma = sample_action(&model.action_set, &model.gamma0, 3.0, &mut rng);

        // perturbation: half the samples move only the state, the rest also the law
        let step = T::of([1e-3, 0.3, 1.0][n % 3]);
        let xt: Vec<T> = x.iter().map(|&v| v + normal::<T, _>(&mut rng) * step).collect();
        let nut = if n % 2 == 0 {
            nu.clone()
        } else {
            perturb_measure(&nu, step, &mut rng)
        };
        let d2 = if n % 2 == 0 {
            T::zero()
        } else {
            wasserstein2(&nu, &nut).map(|(v, _)| v).unwrap_or(T::zero())
        };
        let dist = (sq_dist(&x, &xt).sqrt() + d2).as_f64();
        let root_m2 = nu.second_moment().sqrt();
        let root_m2t = nut.second_moment().sqrt();

        model.drift(t, &x, &nu, &gamma, &mut b);
        model.diffusion(t, &x, &nu, &mut s);
        let f = model.running_cost(t, &x, &nu, &gamma);
        let terminal = model.terminal_cost(&x, &nu);
        f_nonneg.push(f.as_f64());
        terminal_nonneg.push(terminal.as_f64());

        let gnorm = norm(&gamma);
        let xnorm = norm(&x);
        drift_growth.push((norm(&b) / (T::one() + xnorm + gnorm + root_m2)).as_f64());
        diffusion_growth.push((norm(&s) / (T::one() + xnorm + root_m2)).as_f64());
        let quad = T::one() + sq_norm(&x) + gnorm * gnorm + nu.second_moment();
        cost_growth.push((f.abs().max(terminal.abs()) / quad).as_f64());

        if dist > 0.0 {
            model.drift(t, &xt, &nut, &gamma, &mut bt);
            model.diffusion(t, &xt, &nut, &mut st);
            drift_lip.push(sq_dist(&b, &bt).sqrt().as_f64() / dist);
            diffusion_lip.push(sq_dist(&s, &st).sqrt().as_f64() / dist);
            let ft = model.running_cost(t, &xt, &nut, &gamma);
            let terminal_t = model.terminal_cost(&xt, &nut);
            let local = (T::one() + xnorm + norm(&xt) + root_m2 + root_m2t).as_f64();
            let diff = ((f - ft).abs() + (terminal - terminal_t).abs()).as_f64();
            cost_lip.push(diff / (dist * local));
        }

        if let ActionSet::Closed(set) = &model.action_set {
            let scale = (2.0 * set.r0.as_f64()).max(3.0);
            let g = sample_action(&model.action_set, &model.gamma0, scale, &mut rng);
            let gn = norm(&g);
            if gn > set.r0 {
                let fg = model.running_cost(t, &x, &nu, &g);
                coercivity.push((fg / (set.c0 * gn * gn)).as_f64());
            }
        }
    }

    AssumptionReport {
        checks: vec![
            f_nonneg.finish(),
            terminal_nonneg.finish(),
            drift_growth.finish(),
            diffusion_growth.finish(),
            drift_lip.finish(),
            diffusion_lip.finish(),
            cost_lip.finish(),
            cost_growth.finish(),
            coercivity.finish(),
        ],
    }
}

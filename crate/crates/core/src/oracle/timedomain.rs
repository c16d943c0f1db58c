use nalgebra::{Matrix4, SMatrix, SymmetricEigen, Vector4};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::model::{total_occupation, DetectionConfig, NoiseParams, SystemParams};
use crate::spectra::{check_loop, loop_damping, n_imp_hom, FeedbackConfig, LoopModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    /// Exact Gaussian update of the linear plant over each step.
    #[default]
    ExactOu,
    /// Semi-implicit Euler–Maruyama, kept for cross-validation.
    SemiImplicitEuler,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryConfig {
    /// Sample spacing, seconds.
    pub dt: f64,
    /// Recorded length, seconds.
    pub duration: f64,
    pub seed: u64,
    #[serde(default)]
    pub scheme: Scheme,
    pub feedback: FeedbackConfig,
    /// Thermal plus back-action force noise.
    #[serde(default = "yes")]
    pub force_noise: bool,
    /// White imprecision added to the readout.
    #[serde(default = "yes")]
    pub imprecision_noise: bool,
    /// Unrecorded settling time; `None` means three closed-loop decay times.
    #[serde(default)]
    pub burn_in: Option<f64>,
}

fn yes() -> bool {
    true
}

impl TrajectoryConfig {
    pub fn new(dt: f64, duration: f64, seed: u64, feedback: FeedbackConfig) -> Self {
        TrajectoryConfig {
            dt,
            duration,
            seed,
            scheme: Scheme::ExactOu,
            feedback,
            force_noise: true,
            imprecision_noise: true,
            burn_in: None,
        }
    }

    pub fn scheme(mut self, s: Scheme) -> Self {
        self.scheme = s;
        self
    }

    pub fn quiet(mut self) -> Self {
        self.force_noise = false;
        self.imprecision_noise = false;
        self
    }

    /// Closed-loop energy decay rate.
    pub fn gamma_eff(&self, p: &SystemParams) -> f64 {
        loop_damping(p, &self.feedback).0
    }

    pub fn validate(&self, p: &SystemParams) -> Result<()> {
        self.feedback.validate()?;
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::invalid("trajectory.dt", "must be finite and > 0"));
        }
        check_loop(p, &self.feedback)?;
        let g_eff = self.gamma_eff(p);
        if self.dt * g_eff >= 0.05 {
            return Err(Error::invalid(
                "trajectory.dt",
                format!("dt x closed-loop rate = {:.3e}, must stay below 0.05", self.dt * g_eff),
            ));
        }
        // the filter update is exact; the delay is quantized to whole steps
        if matches!(self.feedback.loop_model, LoopModel::DelayedBandlimited { .. })
            && self.dt * p.omega_m > 0.1
        {
            return Err(Error::invalid(
                "trajectory.dt",
                format!("delayed loop needs dt x omega_m <= 0.1, got {:.3e}", self.dt * p.omega_m),
            ));
        }
        // exact updates only need Nyquist margin; Euler also needs to resolve the period
        let per_period = match self.scheme {
            Scheme::ExactOu => std::f64::consts::FRAC_PI_2,
            Scheme::SemiImplicitEuler => 0.05,
        };
        if self.dt * p.omega_m > per_period {
            return Err(Error::invalid(
                "trajectory.dt",
                format!("dt x omega_m = {:.3e} exceeds {per_period:.3e} for this scheme", self.dt * p.omega_m),
            ));
        }
        if self.duration * g_eff < 200.0 {
            return Err(Error::invalid(
                "trajectory.duration",
                format!("covers {:.1} decay times, need at least 200", self.duration * g_eff),
            ));
        }
        Ok(())
    }
}

/// Uniformly sampled records.
///
/// `x[k]` is the displacement at `k·dt`; `y[k]` is the homodyne readout `x + x_imp`
/// averaged over `[k·dt, (k+1)·dt)` (a point sample for the Euler scheme). Both are in
/// the units of `x_zp`.
#[derive(Debug, Clone, PartialEq)]
pub struct Records {
    pub dt: f64,
    pub seed: u64,
    pub params_hash: [u8; 32],
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

/// SHA-256 of the JSON encoding of everything that determines a trajectory.
pub fn trajectory_hash(cfg: &TrajectoryConfig, p: &SystemParams, n: &NoiseParams, d: &DetectionConfig) -> [u8; 32] {
    let json = serde_json::to_vec(&(cfg, p, n, d)).expect("plain structs serialize");
    Sha256::digest(json).into()
}

/// Two-sided white intensities: force `q` (acceleration²/Hz) and imprecision `r`
/// (displacement²/Hz), chosen so the symmetrized bath holds `n_tot + 1/2` quanta and
/// the readout floor is `n_imp_hom`.
fn intensities(cfg: &TrajectoryConfig, p: &SystemParams, n: &NoiseParams, d: &DetectionConfig) -> Result<(f64, f64)> {
    let s_zp = p.s_zp();
    let q = if cfg.force_noise {
        let n_tot = total_occupation(p, n, Default::default());
        (p.omega_m * p.gamma_m).powi(2) * (n_tot + 0.5) * s_zp
    } else {
        0.0
    };
    let r = if cfg.imprecision_noise {
        if !(d.eta_hom > 0.0) || !(p.cooperativity() > 0.0) {
            return Err(Error::invalid("eta_hom", "imprecision noise needs a nonzero measurement rate"));
        }
        n_imp_hom(p, d) * s_zp
    } else {
        0.0
    };
    Ok((q, r))
}

type M8 = SMatrix<f64, 8, 8>;
type M5 = SMatrix<f64, 5, 5>;

/// One exact step of `ds = A s dt + Σ b_k dW_k + e u dt` with `u` held constant.
struct OuStep {
    phi: Matrix4<f64>,
    root: Matrix4<f64>,
    psi: Vector4<f64>,
}

impl OuStep {
    fn new(a: &Matrix4<f64>, noises: &[(Vector4<f64>, f64)], input: Vector4<f64>, dt: f64) -> Result<Self> {
        let phi = (a * dt).exp();
        let mut cov = Matrix4::<f64>::zeros();
        for (b, intensity) in noises {
            let nb = b.norm();
            if nb == 0.0 || *intensity == 0.0 {
                continue;
            }
            // Van Loan, one unit-norm source at a time to keep the blocks balanced
            let u = b / nb;
            let mut m = M8::zeros();
            m.fixed_view_mut::<4, 4>(0, 0).copy_from(&(-a * dt));
            m.fixed_view_mut::<4, 4>(0, 4).copy_from(&(u * u.transpose() * dt));
            m.fixed_view_mut::<4, 4>(4, 4).copy_from(&(a.transpose() * dt));
            let e = m.exp();
            let phi_t = e.fixed_view::<4, 4>(4, 4).transpose();
            cov += phi_t * e.fixed_view::<4, 4>(0, 4) * (intensity * nb * nb);
        }
        cov = 0.5 * (cov + cov.transpose());
        let mut m = M5::zeros();
        m.fixed_view_mut::<4, 4>(0, 0).copy_from(&(a * dt));
        m.fixed_view_mut::<4, 1>(0, 4).copy_from(&(input * dt));
        let psi = m.exp().fixed_view::<4, 1>(0, 4).into_owned();
        Ok(OuStep { phi, root: psd_root(&cov)?, psi })
    }

    fn advance(&self, s: &Vector4<f64>, z: &Vector4<f64>, u: f64) -> Vector4<f64> {
        self.phi * s + self.root * z + self.psi * u
    }
}

/// `L` with `L Lᵀ = c` for a symmetric positive semidefinite `c`.
fn psd_root(c: &Matrix4<f64>) -> Result<Matrix4<f64>> {
    let eig = SymmetricEigen::new(*c);
    let top = eig.eigenvalues.amax();
    let mut root = eig.eigenvectors;
    for (k, &lam) in eig.eigenvalues.iter().enumerate() {
        if lam < -1e-9 * top {
            return Err(Error::Numerical(format!("step covariance not positive semidefinite ({lam:.3e})")));
        }
        let s = lam.max(0.0).sqrt();
        root.column_mut(k).scale_mut(s);
    }
    Ok(root)
}

fn normals(rng: &mut ChaCha8Rng) -> Vector4<f64> {
    Vector4::from_fn(|_, _| rng.sample(StandardNormal))
}

/// Approximate stationary displacement variance, used to start near equilibrium.
fn start_variance(cfg: &TrajectoryConfig, p: &SystemParams, q: f64, r: f64) -> f64 {
    let g_eff = cfg.gamma_eff(p);
    let gfb = cfg.feedback.gamma_fb(p);
    q / (2.0 * g_eff * p.omega_m * p.omega_m) + gfb * gfb * r / (2.0 * g_eff)
}

/// Integrates the cold-damped oscillator and returns displacement and readout records.
pub fn timedomain_simulate(
    cfg: &TrajectoryConfig,
    p: &SystemParams,
    n: &NoiseParams,
    d: &DetectionConfig,
) -> Result<Records> {
    p.validate()?;
    n.validate()?;
    cfg.validate(p)?;
    let (q, r) = intensities(cfg, p, n, d)?;
    let len = (cfg.duration / cfg.dt).round() as usize;
    let burn = (cfg.burn_in.unwrap_or(3.0 / cfg.gamma_eff(p)) / cfg.dt).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let sd = start_variance(cfg, p, q, r).sqrt();
    let x0: f64 = sd * rng.sample::<f64, _>(StandardNormal);
    let v0: f64 = sd * p.omega_m * rng.sample::<f64, _>(StandardNormal);
    let (x, y) = match cfg.scheme {
        Scheme::ExactOu => exact(cfg, p, q, r, x0, v0, burn, len, &mut rng)?,
        Scheme::SemiImplicitEuler => euler(cfg, p, q, r, x0, v0, burn, len, &mut rng)?,
    };
    Ok(Records {
        dt: cfg.dt,
        seed: cfg.seed,
        params_hash: trajectory_hash(cfg, p, n, d),
        x,
        y,
    })
}

/// Independent trajectories, one per seed, in parallel.
pub fn simulate_ensemble(
    cfg: &TrajectoryConfig,
    seeds: &[u64],
    p: &SystemParams,
    n: &NoiseParams,
    d: &DetectionConfig,
) -> Result<Vec<Records>> {
    seeds
        .par_iter()
        .map(|&seed| timedomain_simulate(&TrajectoryConfig { seed, ..*cfg }, p, n, d))
        .collect()
}

/// Feedback filter state for the delayed, band-limited loop.
struct DelayLine {
    k0: f64,
    decay: f64,
    history: Vec<f64>,
    head: usize,
    q: f64,
}

impl DelayLine {
    /// `extra_lag` is the scheme's own latency in steps (sample averaging and hold).
    fn new(p: &SystemParams, fb: &FeedbackConfig, dt: f64, extra_lag: f64) -> Result<Option<Self>> {
        let LoopModel::DelayedBandlimited { delay, bandwidth } = fb.loop_model else {
            return Ok(None);
        };
        let lag = (delay / dt - extra_lag).round().max(0.0) as usize;
        // the loop that actually runs, with the quantized delay
        let realized = FeedbackConfig {
            loop_model: LoopModel::DelayedBandlimited {
                delay: (lag as f64 + extra_lag) * dt,
                bandwidth,
            },
            ..*fb
        };
        check_loop(p, &realized)?;
        let ratio = p.omega_m / bandwidth;
        Ok(Some(DelayLine {
            k0: p.omega_m * fb.gamma_fb(p) * (1.0 + ratio * ratio).sqrt(),
            decay: (-bandwidth * dt).exp(),
            history: vec![0.0; lag + 1],
            head: 0,
            q: 0.0,
        }))
    }

    fn force(&self) -> f64 {
        -self.k0 * self.q
    }

    /// Stores this step's readout and advances the filter with the delayed one.
    fn push(&mut self, y: f64) {
        self.history[self.head] = y;
        self.head = (self.head + 1) % self.history.len();
        let delayed = self.history[self.head];
        self.q = self.decay * self.q + (1.0 - self.decay) * delayed;
    }
}

/// Exact update in the lab frame. State `(x, u/Ωm, Ωm∫x, Ωm∫x_imp)` over one step,
/// where for the viscous loop `u = ẋ + Γfb x_imp` absorbs the derivative of the white
/// imprecision so the loop stays a Markov system.
#[allow(clippy::too_many_arguments)]
fn exact(
    cfg: &TrajectoryConfig,
    p: &SystemParams,
    q: f64,
    r: f64,
    x0: f64,
    v0: f64,
    burn: usize,
    len: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let wm = p.omega_m;
    let dt = cfg.dt;
    let mut delay = DelayLine::new(p, &cfg.feedback, dt, 0.5)?;
    let (damping, gfb) = match delay {
        Some(_) => (p.gamma_m, 0.0),
        None => (p.gamma_m + cfg.feedback.gamma_fb(p), cfg.feedback.gamma_fb(p)),
    };
    #[rustfmt::skip]
    let a = Matrix4::new(
        0.0, wm, 0.0, 0.0,
        -wm, -damping, 0.0, 0.0,
        wm, 0.0, 0.0, 0.0,
        0.0, 0.0, 0.0, 0.0,
    );
    let imp = Vector4::new(-gfb, damping * gfb / wm, 0.0, wm);
    let force = Vector4::new(0.0, 1.0 / wm, 0.0, 0.0);
    let step = OuStep::new(&a, &[(imp, r), (force, q)], force, dt)?;

    let mut s = Vector4::new(x0, v0 / wm, 0.0, 0.0);
    let mut xs = Vec::with_capacity(len);
    let mut ys = Vec::with_capacity(len);
    for k in 0..burn + len {
        let u = delay.as_ref().map_or(0.0, DelayLine::force);
        let x = s[0];
        s = step.advance(&s, &normals(rng), u);
        let y = (s[2] + s[3]) / (wm * dt);
        s[2] = 0.0;
        s[3] = 0.0;
        if let Some(dl) = delay.as_mut() {
            dl.push(y);
        }
        if k >= burn {
            xs.push(x);
            ys.push(y);
        }
    }
    Ok((xs, ys))
}

#[allow(clippy::too_many_arguments)]
fn euler(
    cfg: &TrajectoryConfig,
    p: &SystemParams,
    q: f64,
    r: f64,
    x0: f64,
    v0: f64,
    burn: usize,
    len: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let dt = cfg.dt;
    let wm2 = p.omega_m * p.omega_m;
    let mut delay = DelayLine::new(p, &cfg.feedback, dt, 1.0)?;
    let gfb = if delay.is_some() { 0.0 } else { cfg.feedback.gamma_fb(p) };
    let (sq, sr) = ((q * dt).sqrt(), (r / dt).sqrt());
    let (mut x, mut v) = (x0, v0);
    let mut prev_y = f64::NAN;
    let mut xs = Vec::with_capacity(len);
    let mut ys = Vec::with_capacity(len);
    for k in 0..burn + len {
        let y = x + sr * rng.sample::<f64, _>(StandardNormal);
        let fb = match delay.as_ref() {
            Some(dl) => dl.force(),
            None if prev_y.is_nan() => -gfb * v,
            None => -gfb * (y - prev_y) / dt,
        };
        prev_y = y;
        v += dt * (-wm2 * x - p.gamma_m * v + fb) + sq * rng.sample::<f64, _>(StandardNormal);
        if let Some(dl) = delay.as_mut() {
            dl.push(y);
        }
        if k >= burn {
            xs.push(x);
            ys.push(y);
        }
        x += dt * v;
    }
    Ok((xs, ys))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn small() -> (SystemParams, NoiseParams, DetectionConfig) {
        let p = SystemParams::from_cooperativity(TAU * 1e3, TAU * 2.0, TAU * 1e6, 1e-3, 100.0, 50.0);
        let d = DetectionConfig { eta_hom: 0.5, eta_het: 0.5, theta: 0.0, omega_if: TAU * 1e5 };
        (p, NoiseParams::ideal(), d)
    }

    #[test]
    fn quiet_is_zero() {
        let (p, n, d) = small();
        let cfg = TrajectoryConfig::new(1e-5, 20.0, 1, FeedbackConfig::viscous(5.0)).quiet();
        let rec = timedomain_simulate(&cfg, &p, &n, &d).unwrap();
        assert!(rec.x.iter().chain(&rec.y).all(|v| *v == 0.0));
    }

    #[test]
    fn deterministic() {
        let (p, n, d) = small();
        let cfg = TrajectoryConfig::new(1e-5, 4.0, 9, FeedbackConfig::viscous(20.0));
        let a = timedomain_simulate(&cfg, &p, &n, &d).unwrap();
        let b = timedomain_simulate(&cfg, &p, &n, &d).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_coarse_steps() {
        let (p, n, d) = small();
        let cfg = TrajectoryConfig::new(1e-3, 20.0, 1, FeedbackConfig::viscous(5.0));
        assert!(timedomain_simulate(&cfg, &p, &n, &d).is_err());
    }
}

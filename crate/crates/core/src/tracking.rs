//! Nearest-corner vehicle tracking with a bank of Kalman filters
//! (stationary, constant-velocity, constant-acceleration) fused by
//! multiple-model association: each filter's pre-fit residual yields a
//! likelihood that reweights per-model probabilities every frame, and the
//! highest-probability filter provides the track output.

use nalgebra::{DMatrix, DVector, Matrix2};
use serde::{Deserialize, Serialize};

use crate::association::{GateCheck, TrackPrediction};
use crate::error::{Error, Result};
use crate::geometry::{wrap_signed, OrientedRect, Point2};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Stationary,
    ConstVelocity,
    ConstAcceleration,
}

impl ModelKind {
    pub const BANK: [ModelKind; 3] = [
        ModelKind::Stationary,
        ModelKind::ConstVelocity,
        ModelKind::ConstAcceleration,
    ];

    /// State dimension: (x,y,theta), (x,y,vx,vy) or the full 8-vector
    /// (x,y,vx,vy,ax,ay,theta,delta).
    pub fn dim(&self) -> usize {
        match self {
            ModelKind::Stationary => 3,
            ModelKind::ConstVelocity => 4,
            ModelKind::ConstAcceleration => 8,
        }
    }

    /// Number of observed components; heading is observed wherever the
    /// model carries it.
    pub fn obs_dim(&self) -> usize {
        match self {
            ModelKind::ConstVelocity => 2,
            _ => 3,
        }
    }

    fn theta_index(&self) -> Option<usize> {
        match self {
            ModelKind::Stationary => Some(2),
            ModelKind::ConstVelocity => None,
            ModelKind::ConstAcceleration => Some(6),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::Stationary => "stationary",
            ModelKind::ConstVelocity => "const_velocity",
            ModelKind::ConstAcceleration => "const_acceleration",
        }
    }
}

/// Full vehicle state housing; entries a model does not carry stay zero.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VehicleState {
    pub x: f64,
    pub y: f64,
    pub v_x: f64,
    pub v_y: f64,
    pub a_x: f64,
    pub a_y: f64,
    pub theta: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Lifecycle {
    Tentative,
    Confirmed,
    Dead,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrackingConfig {
    /// Stationary-model process noise (all diagonal entries).
    pub q_stationary: f64,
    /// Constant-velocity process noise on the velocity entries (bank slot).
    pub q_cv_vel: f64,
    /// Constant-acceleration process noise on the acceleration entries.
    pub q_ca_acc: f64,
    /// Velocity process noise of the single-model baseline. A lone CV
    /// filter has no acceleration slot to hand maneuvers to, so it runs a
    /// general-purpose (larger) tuning.
    pub q_single_cv: f64,
    /// Measurement noise std on corner position (meters).
    pub r_pos_std: f64,
    /// Measurement noise std on heading (degrees).
    pub r_theta_std_deg: f64,
    pub confirm_hits: u32,
    pub max_misses: u32,
    /// Lower bound kept on every model probability.
    pub p_floor: f64,
    /// Run a single constant-velocity filter instead of the bank.
    pub single_model: bool,
}

impl Default for TrackingConfig {
    fn default() -> Self {
        Self {
            q_stationary: 1e-4,
            q_cv_vel: 0.01,
            q_ca_acc: 2.0,
            q_single_cv: 0.1,
            r_pos_std: 0.05,
            r_theta_std_deg: 2.0,
            confirm_hits: 3,
            max_misses: 5,
            p_floor: 0.001,
            single_model: false,
        }
    }
}

impl TrackingConfig {
    fn r_pos_var(&self) -> f64 {
        self.r_pos_std * self.r_pos_std
    }
    fn r_theta_var(&self) -> f64 {
        let r = self.r_theta_std_deg.to_radians();
        r * r
    }
}

/// One Kalman filter of the bank.
#[derive(Debug, Clone)]
pub struct FilterSlot {
    pub model: ModelKind,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub probability: f64,
}

/// Corner measurement handed to the filter bank.
#[derive(Debug, Clone, Copy)]
pub struct Measurement {
    pub pos: Point2,
    pub theta: f64,
}

pub fn transition_matrix(model: ModelKind, dt: f64) -> DMatrix<f64> {
    match model {
        ModelKind::Stationary => DMatrix::identity(3, 3),
        ModelKind::ConstVelocity => {
            let mut f = DMatrix::identity(4, 4);
            f[(0, 2)] = dt;
            f[(1, 3)] = dt;
            f
        }
        ModelKind::ConstAcceleration => {
            let mut f = DMatrix::identity(8, 8);
            let half = 0.5 * dt * dt;
            f[(0, 2)] = dt;
            f[(0, 4)] = half;
            f[(1, 3)] = dt;
            f[(1, 5)] = half;
            f[(2, 4)] = dt;
            f[(3, 5)] = dt;
            f
        }
    }
}

pub fn process_noise(model: ModelKind, cfg: &TrackingConfig) -> DMatrix<f64> {
    match model {
        ModelKind::Stationary => DMatrix::identity(3, 3) * cfg.q_stationary,
        ModelKind::ConstVelocity => {
            let qv = if cfg.single_model {
                cfg.q_single_cv
            } else {
                cfg.q_cv_vel
            };
            let mut q = DMatrix::zeros(4, 4);
            q[(2, 2)] = qv;
            q[(3, 3)] = qv;
            q
        }
        ModelKind::ConstAcceleration => {
            let mut q = DMatrix::zeros(8, 8);
            q[(4, 4)] = cfg.q_ca_acc;
            q[(5, 5)] = cfg.q_ca_acc;
            q
        }
    }
}

pub fn observation_matrix(model: ModelKind) -> DMatrix<f64> {
    let mut h = DMatrix::zeros(model.obs_dim(), model.dim());
    h[(0, 0)] = 1.0;
    h[(1, 1)] = 1.0;
    if let Some(ti) = model.theta_index() {
        h[(2, ti)] = 1.0;
    }
    h
}

pub fn measurement_noise(model: ModelKind, cfg: &TrackingConfig) -> DMatrix<f64> {
    let mut r = DMatrix::zeros(model.obs_dim(), model.obs_dim());
    r[(0, 0)] = cfg.r_pos_var();
    r[(1, 1)] = cfg.r_pos_var();
    if model.obs_dim() > 2 {
        r[(2, 2)] = cfg.r_theta_var();
    }
    r
}

/// Kalman prediction step: `mean <- F mean`, `cov <- F P F' + Q`.
pub fn predict(slot: &FilterSlot, dt: f64, cfg: &TrackingConfig) -> FilterSlot {
    let f = transition_matrix(slot.model, dt);
    let mean = &f * &slot.mean;
    let cov = &f * &slot.cov * f.transpose() + process_noise(slot.model, cfg);
    FilterSlot {
        model: slot.model,
        mean,
        cov: symmetrize(cov),
        probability: slot.probability,
    }
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    let t = m.transpose();
    (m + t) * 0.5
}

/// Joseph-form Kalman correction. Returns the updated (mean, cov) and the
/// pre-fit residual `z - H * mean`.
pub fn kf_update(
    mean: &DVector<f64>,
    cov: &DMatrix<f64>,
    h: &DMatrix<f64>,
    r: &DMatrix<f64>,
    z: &DVector<f64>,
) -> Result<(DVector<f64>, DMatrix<f64>, DVector<f64>)> {
    let s = h * cov * h.transpose() + r;
    let chol = s.cholesky().ok_or(Error::SingularInnovation)?;
    let residual = z - h * mean;
    // K = P H' S^-1 = (S^-1 H P)' since P is symmetric.
    let k = chol.solve(&(h * cov)).transpose();
    let new_mean = mean + &k * &residual;
    let i_kh = DMatrix::identity(mean.len(), mean.len()) - &k * h;
    let new_cov = &i_kh * cov * i_kh.transpose() + &k * r * k.transpose();
    Ok((new_mean, symmetrize(new_cov), residual))
}

/// Model-specific Kalman update with the slot's observation matrix; the
/// heading component is wrapped into the rectangle's quarter-turn symmetry
/// before the linear correction.
pub fn update(
    slot: &FilterSlot,
    z: &Measurement,
    cfg: &TrackingConfig,
) -> Result<(FilterSlot, DVector<f64>)> {
    let h = observation_matrix(slot.model);
    let r = measurement_noise(slot.model, cfg);
    let zv = measurement_vector(slot, z);
    let (mean, cov, residual) = kf_update(&slot.mean, &slot.cov, &h, &r, &zv)?;
    Ok((
        FilterSlot {
            model: slot.model,
            mean,
            cov,
            probability: slot.probability,
        },
        residual,
    ))
}

fn measurement_vector(slot: &FilterSlot, z: &Measurement) -> DVector<f64> {
    match slot.model.theta_index() {
        None => DVector::from_vec(vec![z.pos.x, z.pos.y]),
        Some(ti) => {
            let pred_theta = slot.mean[ti];
            let aligned =
                pred_theta + wrap_signed(z.theta - pred_theta, std::f64::consts::FRAC_PI_2);
            DVector::from_vec(vec![z.pos.x, z.pos.y, aligned])
        }
    }
}

/// Multivariate normal density at residual `r` with covariance `s`.
pub fn mvn_pdf(r: &DVector<f64>, s: &DMatrix<f64>) -> Result<f64> {
    let chol = s.clone().cholesky().ok_or(Error::SingularInnovation)?;
    let det: f64 = chol.l_dirty().diagonal().iter().map(|d| d * d).product();
    let quad = r.dot(&chol.solve(r));
    let m = r.len() as f64;
    Ok((-0.5 * quad).exp() / ((2.0 * std::f64::consts::PI).powf(m / 2.0) * det.sqrt()))
}

/// Reweight model probabilities by likelihoods, then project back onto the
/// floor-bounded simplex. Scaling all likelihoods by a common constant
/// leaves the result unchanged, and identical likelihoods are a fixpoint.
pub fn update_probabilities(probs: &mut [f64], likelihoods: &[f64], floor: f64) {
    let n = probs.len();
    let mut w: Vec<f64> = probs
        .iter()
        .zip(likelihoods)
        .map(|(p, f)| p * f)
        .collect();
    let sum: f64 = w.iter().sum();
    if sum.is_nan() || sum <= 1e-300 {
        return; // no usable information in this frame, keep priors
    }
    for v in &mut w {
        *v /= sum;
    }
    // Lower-bounded simplex projection preserving ratios of free entries.
    let mut fixed = vec![false; n];
    loop {
        let fixed_mass = floor * fixed.iter().filter(|&&f| f).count() as f64;
        let free_sum: f64 = w
            .iter()
            .zip(&fixed)
            .filter(|(_, &f)| !f)
            .map(|(v, _)| *v)
            .sum();
        let scale = if free_sum > 0.0 {
            (1.0 - fixed_mass) / free_sum
        } else {
            0.0
        };
        let mut changed = false;
        for i in 0..n {
            if !fixed[i] && w[i] * scale < floor {
                fixed[i] = true;
                changed = true;
            }
        }
        if !changed {
            for i in 0..n {
                probs[i] = if fixed[i] { floor } else { w[i] * scale };
            }
            return;
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub timestamp: f64,
    /// Highest-probability filter output.
    pub corner: Point2,
    pub heading: f64,
    /// Probability-weighted corner, recorded alongside the argmax output.
    pub mixture_corner: Point2,
}

/// A tracked vehicle.
#[derive(Debug, Clone)]
pub struct Track {
    pub id: u64,
    pub slots: Vec<FilterSlot>,
    pub lifecycle: Lifecycle,
    pub hits: u32,
    pub misses: u32,
    pub history: Vec<HistoryEntry>,
    /// Continuous heading estimate used to disambiguate quarter-turn
    /// symmetric rectangle headings.
    pub last_heading: f64,
    pub prev_rect: Option<OrientedRect>,
}

impl Track {
    pub fn new(id: u64, z: &Measurement, cfg: &TrackingConfig) -> Self {
        let models: Vec<ModelKind> = if cfg.single_model {
            vec![ModelKind::ConstVelocity]
        } else {
            ModelKind::BANK.to_vec()
        };
        let p0 = 1.0 / models.len() as f64;
        let slots = models
            .into_iter()
            .map(|model| {
                let mut mean = DVector::zeros(model.dim());
                mean[0] = z.pos.x;
                mean[1] = z.pos.y;
                if let Some(ti) = model.theta_index() {
                    mean[ti] = z.theta;
                }
                // diag(1,1,4,4,1,1,0.1,0.1) truncated to the model's state.
                let full = [1.0, 1.0, 4.0, 4.0, 1.0, 1.0, 0.1, 0.1];
                let diag: Vec<f64> = match model {
                    ModelKind::Stationary => vec![1.0, 1.0, 0.1],
                    ModelKind::ConstVelocity => full[..4].to_vec(),
                    ModelKind::ConstAcceleration => full.to_vec(),
                };
                FilterSlot {
                    model,
                    mean,
                    cov: DMatrix::from_diagonal(&DVector::from_vec(diag)),
                    probability: p0,
                }
            })
            .collect();
        Self {
            id,
            slots,
            lifecycle: Lifecycle::Tentative,
            hits: 1,
            misses: 0,
            history: Vec::new(),
            last_heading: z.theta,
            prev_rect: None,
        }
    }

    /// Index of the highest-probability slot (ties keep bank order).
    pub fn best_slot_index(&self) -> usize {
        let mut best = 0;
        for i in 1..self.slots.len() {
            if self.slots[i].probability > self.slots[best].probability {
                best = i;
            }
        }
        best
    }

    pub fn best_slot(&self) -> &FilterSlot {
        &self.slots[self.best_slot_index()]
    }

    pub fn fused_corner(&self) -> Point2 {
        let s = self.best_slot();
        Point2::new(s.mean[0], s.mean[1])
    }

    pub fn fused_heading(&self) -> f64 {
        let s = self.best_slot();
        match s.model.theta_index() {
            Some(ti) => s.mean[ti],
            None => self.last_heading,
        }
    }

    pub fn mixture_corner(&self) -> Point2 {
        let mut x = 0.0;
        let mut y = 0.0;
        for s in &self.slots {
            x += s.probability * s.mean[0];
            y += s.probability * s.mean[1];
        }
        Point2::new(x, y)
    }

    pub fn vehicle_state(&self) -> VehicleState {
        let s = self.best_slot();
        let get = |i: usize| if i < s.mean.len() { s.mean[i] } else { 0.0 };
        match s.model {
            ModelKind::Stationary => VehicleState {
                x: get(0),
                y: get(1),
                v_x: 0.0,
                v_y: 0.0,
                a_x: 0.0,
                a_y: 0.0,
                theta: get(2),
                delta: 0.0,
            },
            ModelKind::ConstVelocity => VehicleState {
                x: get(0),
                y: get(1),
                v_x: get(2),
                v_y: get(3),
                a_x: 0.0,
                a_y: 0.0,
                theta: self.last_heading,
                delta: 0.0,
            },
            ModelKind::ConstAcceleration => VehicleState {
                x: get(0),
                y: get(1),
                v_x: get(2),
                v_y: get(3),
                a_x: get(4),
                a_y: get(5),
                theta: get(6),
                delta: get(7),
            },
        }
    }

    /// Predict every slot forward by `dt` (also the coasting move for
    /// unmatched tracks).
    pub fn predict_all(&mut self, dt: f64, cfg: &TrackingConfig) {
        for slot in &mut self.slots {
            *slot = predict(slot, dt, cfg);
        }
    }

    /// Association view: fused predicted corner plus one gate per model.
    pub fn prediction(&self, cfg: &TrackingConfig) -> TrackPrediction {
        let gates = self
            .slots
            .iter()
            .map(|s| GateCheck {
                pos: Point2::new(s.mean[0], s.mean[1]),
                cov: Matrix2::new(
                    s.cov[(0, 0)] + cfg.r_pos_var(),
                    s.cov[(0, 1)],
                    s.cov[(1, 0)],
                    s.cov[(1, 1)] + cfg.r_pos_var(),
                ),
            })
            .collect();
        TrackPrediction {
            corner: self.fused_corner(),
            heading: self.fused_heading(),
            gates,
        }
    }

    /// Measurement update of the whole bank: per-slot pre-fit residual,
    /// likelihood on the common position block, probability reweighting,
    /// then per-slot Kalman correction.
    pub fn mma_update(&mut self, z: &Measurement, cfg: &TrackingConfig) -> Result<()> {
        let mut likelihoods = Vec::with_capacity(self.slots.len());
        for slot in &self.slots {
            let r_pos = DVector::from_vec(vec![
                z.pos.x - slot.mean[0],
                z.pos.y - slot.mean[1],
            ]);
            let s_pos = DMatrix::from_row_slice(
                2,
                2,
                &[
                    slot.cov[(0, 0)] + cfg.r_pos_var(),
                    slot.cov[(0, 1)],
                    slot.cov[(1, 0)],
                    slot.cov[(1, 1)] + cfg.r_pos_var(),
                ],
            );
            likelihoods.push(mvn_pdf(&r_pos, &s_pos)?);
        }
        let mut probs: Vec<f64> = self.slots.iter().map(|s| s.probability).collect();
        update_probabilities(&mut probs, &likelihoods, cfg.p_floor);
        for (slot, p) in self.slots.iter_mut().zip(&probs) {
            let (updated, _residual) = update(slot, z, cfg)?;
            *slot = updated;
            slot.probability = *p;
        }
        self.last_heading = z.theta;
        Ok(())
    }

    /// Predict + measurement update in one step.
    pub fn mma_step(&mut self, z: &Measurement, dt: f64, cfg: &TrackingConfig) -> Result<()> {
        self.predict_all(dt, cfg);
        self.mma_update(z, cfg)
    }

    pub fn record_history(&mut self, timestamp: f64) {
        debug_assert!(self
            .history
            .last()
            .map(|h| timestamp > h.timestamp)
            .unwrap_or(true));
        self.history.push(HistoryEntry {
            timestamp,
            corner: self.fused_corner(),
            heading: self.fused_heading(),
            mixture_corner: self.mixture_corner(),
        });
    }
}

/// Birth/death bookkeeping:
/// tentative -> confirmed at `confirm_hits` total hits, any -> dead at
/// `max_misses` consecutive misses.
pub fn lifecycle_step(track: &mut Track, matched: bool, cfg: &TrackingConfig) {
    if matched {
        track.hits += 1;
        track.misses = 0;
        if track.lifecycle == Lifecycle::Tentative && track.hits >= cfg.confirm_hits {
            track.lifecycle = Lifecycle::Confirmed;
        }
    } else {
        track.misses += 1;
        if track.misses >= cfg.max_misses {
            track.lifecycle = Lifecycle::Dead;
        }
    }
}

/// Translate a detection to the corner the track has been following.
///
/// The nearest corner can hop to a different physical corner between frames
/// (aspect change); picking the fitted-rectangle corner closest to the
/// track's predicted corner undoes the hop by exactly the signed edge
/// lengths. The heading is aligned to the track's continuous estimate
/// within the quarter-turn rectangle symmetry.
pub fn corner_switch_compensate(track: &Track, new_rect: &OrientedRect) -> Measurement {
    let anchor = track.fused_corner();
    let (mut best, mut best_d) = (new_rect.nearest_corner_index, f64::INFINITY);
    for (i, c) in new_rect.corners.iter().enumerate() {
        let d = c.dist(anchor);
        if d < best_d {
            best = i;
            best_d = d;
        }
    }
    let theta = track.last_heading
        + wrap_signed(
            new_rect.heading - track.last_heading,
            std::f64::consts::FRAC_PI_2,
        );
    Measurement {
        pos: new_rect.corners[best],
        theta,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn cfg() -> TrackingConfig {
        TrackingConfig::default()
    }

    fn slot(model: ModelKind, mean: Vec<f64>) -> FilterSlot {
        let dim = model.dim();
        FilterSlot {
            model,
            mean: DVector::from_vec(mean),
            cov: DMatrix::identity(dim, dim),
            probability: 1.0 / 3.0,
        }
    }

    #[test]
    fn stationary_predict_is_identity_on_mean() {
        let s = slot(ModelKind::Stationary, vec![2.0, -1.0, 0.4]);
        let p = predict(&s, 0.5, &cfg());
        assert_eq!(p.mean, s.mean);
    }

    #[test]
    fn cv_predict_hand_value() {
        let s = slot(ModelKind::ConstVelocity, vec![0.0, 0.0, 1.0, 2.0]);
        let p = predict(&s, 0.1, &cfg());
        assert_abs_diff_eq!(p.mean[0], 0.1, epsilon = 1e-12);
        assert_abs_diff_eq!(p.mean[1], 0.2, epsilon = 1e-12);
        assert_abs_diff_eq!(p.mean[2], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.mean[3], 2.0, epsilon = 1e-12);
    }

    #[test]
    fn ca_predict_half_dt_squared() {
        let s = slot(
            ModelKind::ConstAcceleration,
            vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.3, 0.0],
        );
        let p = predict(&s, 1.0, &cfg());
        assert_abs_diff_eq!(p.mean[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p.mean[2], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p.mean[6], 0.3, epsilon = 1e-12);
    }

    #[test]
    fn scalar_update_gain_half() {
        // P = 1, R = 1, H = 1: K = 0.5, so z = mean + 1 moves the mean by 0.5.
        let mean = DVector::from_vec(vec![2.0]);
        let cov = DMatrix::identity(1, 1);
        let h = DMatrix::identity(1, 1);
        let r = DMatrix::identity(1, 1);
        let z = DVector::from_vec(vec![3.0]);
        let (m, p, resid) = kf_update(&mean, &cov, &h, &r, &z).unwrap();
        assert_abs_diff_eq!(m[0], 2.5, epsilon = 1e-12);
        assert_abs_diff_eq!(resid[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(p[(0, 0)], 0.5, epsilon = 1e-12);
    }

    #[test]
    fn on_prediction_update_keeps_mean_shrinks_cov() {
        let s = slot(ModelKind::Stationary, vec![1.0, 2.0, 0.1]);
        let z = Measurement {
            pos: Point2::new(1.0, 2.0),
            theta: 0.1,
        };
        let (updated, residual) = update(&s, &z, &cfg()).unwrap();
        assert_abs_diff_eq!(residual.norm(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!((updated.mean - s.mean).norm(), 0.0, epsilon = 1e-12);
        assert!(updated.cov.trace() < s.cov.trace());
    }

    #[test]
    fn mvn_mode_density_two_dim() {
        let r = DVector::zeros(2);
        let s = DMatrix::identity(2, 2);
        assert_abs_diff_eq!(
            mvn_pdf(&r, &s).unwrap(),
            1.0 / (2.0 * std::f64::consts::PI),
            epsilon = 1e-12
        );
    }

    #[test]
    fn identical_likelihoods_keep_probabilities() {
        let mut p = vec![0.5, 0.3, 0.2];
        update_probabilities(&mut p, &[0.7, 0.7, 0.7], 0.001);
        assert_abs_diff_eq!(p[0], 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(p[1], 0.3, epsilon = 1e-12);
        assert_abs_diff_eq!(p[2], 0.2, epsilon = 1e-12);
    }

    #[test]
    fn likelihood_scale_invariance() {
        let mut a = vec![0.2, 0.5, 0.3];
        let mut b = a.clone();
        update_probabilities(&mut a, &[0.1, 0.4, 0.2], 0.001);
        update_probabilities(&mut b, &[0.1 * 37.0, 0.4 * 37.0, 0.2 * 37.0], 0.001);
        for (x, y) in a.iter().zip(&b) {
            assert_abs_diff_eq!(x, y, epsilon = 1e-12);
        }
    }

    #[test]
    fn probabilities_floored_and_normalized() {
        let mut p = vec![1.0 / 3.0; 3];
        update_probabilities(&mut p, &[1e-12, 1.0, 1.0], 0.001);
        assert_abs_diff_eq!(p.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        assert!(p.iter().all(|&v| v >= 0.001));
        assert_abs_diff_eq!(p[0], 0.001, epsilon = 1e-12);
    }

    #[test]
    fn zero_likelihoods_keep_priors() {
        let mut p = vec![0.6, 0.3, 0.1];
        update_probabilities(&mut p, &[0.0, 0.0, 0.0], 0.001);
        assert_eq!(p, vec![0.6, 0.3, 0.1]);
    }

    fn track_at(pos: Point2, theta: f64, c: &TrackingConfig) -> Track {
        Track::new(
            1,
            &Measurement { pos, theta },
            c,
        )
    }

    #[test]
    fn cv_model_identified_on_moving_target() {
        let c = cfg();
        let dt = 0.08;
        let v = (4.0, 1.5);
        let mut track = track_at(Point2::new(0.0, 0.0), 0.2, &c);
        for k in 1..=50 {
            let t = k as f64 * dt;
            let z = Measurement {
                pos: Point2::new(v.0 * t, v.1 * t),
                theta: 0.2,
            };
            track.mma_step(&z, dt, &c).unwrap();
        }
        let cv = &track.slots[1];
        assert_eq!(cv.model, ModelKind::ConstVelocity);
        assert!(
            cv.probability > 0.5,
            "CV probability {} after 50 frames (probs {:?})",
            cv.probability,
            track.slots.iter().map(|s| s.probability).collect::<Vec<_>>()
        );
    }

    #[test]
    fn stationary_model_identified_on_static_target() {
        let c = cfg();
        let dt = 0.08;
        let mut track = track_at(Point2::new(5.0, -3.0), 1.0, &c);
        for _ in 1..=50 {
            let z = Measurement {
                pos: Point2::new(5.0, -3.0),
                theta: 1.0,
            };
            track.mma_step(&z, dt, &c).unwrap();
        }
        let st = &track.slots[0];
        assert_eq!(st.model, ModelKind::Stationary);
        assert!(st.probability > 0.5, "probability {}", st.probability);
    }

    #[test]
    fn probabilities_sum_to_one_across_steps() {
        let c = cfg();
        let mut track = track_at(Point2::new(0.0, 0.0), 0.0, &c);
        for k in 1..=200 {
            let t = k as f64 * 0.08;
            let z = Measurement {
                pos: Point2::new(2.0 * t, (0.3 * t).sin()),
                theta: 0.0,
            };
            track.mma_step(&z, 0.08, &c).unwrap();
            let sum: f64 = track.slots.iter().map(|s| s.probability).sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(track.slots.iter().all(|s| s.probability >= c.p_floor));
        }
    }

    #[test]
    fn covariances_stay_psd_over_many_cycles() {
        let c = cfg();
        let mut track = track_at(Point2::new(1.0, 1.0), 0.5, &c);
        for k in 1..=1000 {
            let t = k as f64 * 0.08;
            let z = Measurement {
                pos: Point2::new(1.0 + 3.0 * t, 1.0 - t),
                theta: 0.5,
            };
            track.mma_step(&z, 0.08, &c).unwrap();
            for s in &track.slots {
                let sym_err = (&s.cov - s.cov.transpose()).norm();
                assert!(sym_err < 1e-12);
                let eig = s.cov.clone().symmetric_eigenvalues();
                assert!(
                    eig.iter().all(|&e| e >= -1e-9),
                    "model {:?} min eig {}",
                    s.model,
                    eig.iter().cloned().fold(f64::INFINITY, f64::min)
                );
            }
        }
    }

    #[test]
    fn stationary_noiseless_convergence() {
        let c = cfg();
        let target = Point2::new(7.0, 2.0);
        let mut track = track_at(target, 0.3, &c);
        let mut last_trace = f64::INFINITY;
        let mut last_err = f64::INFINITY;
        for _ in 0..100 {
            track.mma_step(&Measurement { pos: target, theta: 0.3 }, 0.08, &c).unwrap();
            let st = &track.slots[0];
            let trace = st.cov.trace();
            assert!(trace <= last_trace + 1e-12);
            last_trace = trace;
            let err = track.fused_corner().dist(target);
            assert!(err <= last_err + 1e-12);
            last_err = err;
        }
        assert!(last_err < 1e-6);
    }

    #[test]
    fn lifecycle_rules() {
        let c = cfg();
        let mut t = track_at(Point2::new(0.0, 0.0), 0.0, &c);
        assert_eq!(t.lifecycle, Lifecycle::Tentative);
        lifecycle_step(&mut t, true, &c);
        lifecycle_step(&mut t, true, &c);
        assert_eq!(t.lifecycle, Lifecycle::Confirmed);

        // A miss then a match resets the miss counter.
        lifecycle_step(&mut t, false, &c);
        assert_eq!(t.misses, 1);
        lifecycle_step(&mut t, true, &c);
        assert_eq!(t.misses, 0);

        for _ in 0..5 {
            assert_eq!(t.lifecycle, Lifecycle::Confirmed);
            lifecycle_step(&mut t, false, &c);
        }
        assert_eq!(t.lifecycle, Lifecycle::Dead);
    }

    #[test]
    fn corner_compensation_same_corner_passthrough() {
        let c = cfg();
        let rect = OrientedRect::from_bounds(0.0, 2.0, 6.5, 3.0, 4.8);
        let track = track_at(rect.nearest_corner(), 0.0, &c);
        let z = corner_switch_compensate(&track, &rect);
        assert_abs_diff_eq!(z.pos.x, rect.nearest_corner().x, epsilon = 1e-12);
        assert_abs_diff_eq!(z.pos.y, rect.nearest_corner().y, epsilon = 1e-12);
    }

    #[test]
    fn corner_compensation_hop_across_edge() {
        let c = cfg();
        // Track follows the corner at (2, 3); the new fit's nearest corner
        // hopped 4.5 m along the heading axis.
        let track = track_at(Point2::new(2.0, 3.0), 0.0, &c);
        let rect = OrientedRect::from_bounds(0.0, 2.0, 6.5, 3.0, 4.8);
        assert_eq!(rect.nearest_corner_index, 0);
        let hopped = OrientedRect {
            nearest_corner_index: 1,
            ..rect.clone()
        };
        let z = corner_switch_compensate(&track, &hopped);
        let offset = z.pos.dist(hopped.corners[1]);
        assert_abs_diff_eq!(offset, 4.5, epsilon = 1e-12);
        assert_abs_diff_eq!(z.pos.x, 2.0, epsilon = 1e-12);
    }

    #[test]
    fn heading_aligned_mod_quarter_turn() {
        let c = cfg();
        let mut track = track_at(Point2::new(0.0, 0.0), 0.05, &c);
        track.last_heading = 0.05;
        let rect = OrientedRect::from_bounds(
            std::f64::consts::FRAC_PI_2 + 0.02,
            0.0,
            1.0,
            0.0,
            1.0,
        );
        let z = corner_switch_compensate(&track, &rect);
        assert_abs_diff_eq!(z.theta, 0.02, epsilon = 1e-9);
    }
}

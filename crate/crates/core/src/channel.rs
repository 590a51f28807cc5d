//! Scenario geometry and random channel generation.
//!
//! A realization holds the direct channel `H_d` (rows `h_{d,k}^H`), the
//! cascaded RIS channel `H_c` (rows `h_{r,k}^H diag(a)`) and the unit-norm
//! BS-side vector `b` of the rank-one BS-RIS link `a b^H`. Every channel is
//! divided by the noise standard deviation, so the receivers see unit
//! variance AWGN and transmit powers enter the rate formulas directly in
//! milliwatts.

use std::f64::consts::PI;

use nalgebra::Complex;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::gauss_legendre;
use crate::scalar::{cis, CMat, CVec, Real};

/// Which of the three printed pathloss parameter sets a model came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PathlossLabel {
    Weak,
    Strong,
    Los,
    Custom,
}

/// Logarithmic pathloss `alpha + slope * log10(d / 1 m)` in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PathlossRepr", into = "PathlossRepr")]
pub struct PathlossModel {
    pub alpha_db: f64,
    /// dB per decade of distance.
    pub slope_db: f64,
    pub label: PathlossLabel,
}

impl PathlossModel {
    pub const fn weak() -> Self {
        Self {
            alpha_db: 35.1,
            slope_db: 36.7,
            label: PathlossLabel::Weak,
        }
    }

    pub const fn strong() -> Self {
        Self {
            alpha_db: 37.51,
            slope_db: 22.0,
            label: PathlossLabel::Strong,
        }
    }

    pub const fn los() -> Self {
        Self {
            alpha_db: 30.0,
            slope_db: 22.0,
            label: PathlossLabel::Los,
        }
    }

    pub fn custom(alpha_db: f64, slope_db: f64) -> Result<Self> {
        let m = Self {
            alpha_db,
            slope_db,
            label: PathlossLabel::Custom,
        };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha_db.is_finite() && self.alpha_db > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "pathloss alpha must be positive, got {}",
                self.alpha_db
            )));
        }
        if !(self.slope_db.is_finite() && self.slope_db > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "pathloss slope must be positive, got {}",
                self.slope_db
            )));
        }
        Ok(())
    }
}

/// Config-file form: either a preset name or explicit coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
enum PathlossRepr {
    Named(PathlossLabel),
    Explicit {
        alpha_db: f64,
        slope_db: f64,
        #[serde(default = "custom_label")]
        label: PathlossLabel,
    },
}

fn custom_label() -> PathlossLabel {
    PathlossLabel::Custom
}

impl TryFrom<PathlossRepr> for PathlossModel {
    type Error = String;

    fn try_from(r: PathlossRepr) -> std::result::Result<Self, String> {
        let m = match r {
            PathlossRepr::Named(PathlossLabel::Weak) => Self::weak(),
            PathlossRepr::Named(PathlossLabel::Strong) => Self::strong(),
            PathlossRepr::Named(PathlossLabel::Los) => Self::los(),
            PathlossRepr::Named(PathlossLabel::Custom) => {
                return Err("`custom` needs explicit alpha_db and slope_db".into())
            }
            PathlossRepr::Explicit {
                alpha_db,
                slope_db,
                label,
            } => Self {
                alpha_db,
                slope_db,
                label,
            },
        };
        m.validate().map_err(|e| e.to_string())?;
        Ok(m)
    }
}

impl From<PathlossModel> for PathlossRepr {
    fn from(m: PathlossModel) -> Self {
        let preset = match m.label {
            PathlossLabel::Weak => Some(PathlossModel::weak()),
            PathlossLabel::Strong => Some(PathlossModel::strong()),
            PathlossLabel::Los => Some(PathlossModel::los()),
            PathlossLabel::Custom => None,
        };
        match preset {
            Some(p) if p == m => PathlossRepr::Named(m.label),
            _ => PathlossRepr::Explicit {
                alpha_db: m.alpha_db,
                slope_db: m.slope_db,
                label: m.label,
            },
        }
    }
}

/// Pathloss in dB at `distance_m` meters.
pub fn pathloss_db(model: &PathlossModel, distance_m: f64) -> Result<f64> {
    if !(distance_m.is_finite() && distance_m > 0.0) {
        return Err(Error::Domain(format!(
            "distance must be positive and finite, got {distance_m}"
        )));
    }
    Ok(model.alpha_db + model.slope_db * distance_m.log10())
}

/// Half-wavelength ULA response: entry `m` is `exp(j pi m sin(angle))`.
pub fn steering_vector<T: Real>(n_elems: usize, angle: T) -> Result<CVec<T>> {
    if n_elems == 0 {
        return Err(Error::InvalidArgument("steering vector needs at least one element".into()));
    }
    if !angle.is_finite_val() {
        return Err(Error::InvalidArgument(format!(
            "steering angle must be finite, got {}",
            angle.as_f64()
        )));
    }
    let step = T::pi() * angle.sin();
    Ok(CVec::from_fn(n_elems, |m, _| cis(step * T::from_usize_lossy(m))))
}

/// Rank-one LOS link `a b^H` between BS and RIS. `b` has unit norm and `a`
/// carries `amplitude` on every entry.
pub fn los_bs_ris<T: Real>(
    n_ris: usize,
    n_bs: usize,
    angle_ris: T,
    angle_bs: T,
    amplitude: T,
) -> Result<(CVec<T>, CVec<T>)> {
    if !(amplitude.is_finite_val() && amplitude >= T::zero()) {
        return Err(Error::InvalidArgument("LOS amplitude must be finite and nonnegative".into()));
    }
    let a = steering_vector(n_ris, angle_ris)? * Complex::new(amplitude, T::zero());
    let b = steering_vector(n_bs, angle_bs)? / Complex::new(T::from_usize_lossy(n_bs).sqrt(), T::zero());
    Ok((a, b))
}

/// Discretization of a truncated Laplacian angular density.
///
/// The density has standard deviation `asd`, is centered at `nominal` and is
/// truncated to `nominal +- pi` and renormalized. Each half line is split into
/// panels that are geometrically refined near the peak (scale `asd`) and
/// uniformly refined to resolve array phases, with 16-point Gauss-Legendre
/// rules per panel.
#[derive(Debug, Clone)]
pub struct AngularQuadrature {
    pub angles: Vec<f64>,
    pub weights: Vec<f64>,
}

const GL_ORDER: usize = 16;
const MIN_UNIFORM_PANELS: usize = 128;

impl AngularQuadrature {
    /// Quadrature accurate for arrays of up to `n_elems` elements.
    pub fn laplacian(nominal: f64, asd: f64, n_elems: usize) -> Result<Self> {
        if !nominal.is_finite() {
            return Err(Error::InvalidArgument("nominal angle must be finite".into()));
        }
        if !(asd >= 0.0) || asd.is_infinite() {
            return Err(Error::InvalidArgument(format!(
                "angular spread must be finite and nonnegative, got {asd}"
            )));
        }
        if asd == 0.0 {
            return Ok(Self {
                angles: vec![nominal],
                weights: vec![1.0],
            });
        }
        let c = std::f64::consts::SQRT_2 / asd;
        // mass of one truncated half is 1/2 after renormalization
        let z = -(-c * PI).exp_m1();
        let density = |t: f64| 0.5 * c * (-c * t).exp() / z;

        let panels = MIN_UNIFORM_PANELS.max(n_elems);
        let mut breaks: Vec<f64> = (0..=panels).map(|k| PI * k as f64 / panels as f64).collect();
        let mut g = asd / 256.0;
        while g < PI {
            breaks.push(g);
            g *= 2.0;
        }
        breaks.sort_by(|a, b| a.partial_cmp(b).unwrap());
        breaks.dedup_by(|a, b| (*a - *b).abs() < 1e-14);

        let (gx, gw) = gauss_legendre(GL_ORDER);
        let mut angles = Vec::with_capacity(2 * GL_ORDER * breaks.len());
        let mut weights = Vec::with_capacity(angles.capacity());
        for w in breaks.windows(2) {
            let (lo, hi) = (w[0], w[1]);
            let half = 0.5 * (hi - lo);
            let mid = 0.5 * (hi + lo);
            for (x, wx) in gx.iter().zip(&gw) {
                let t = mid + half * x;
                let wt = wx * half * density(t);
                angles.push(nominal + t);
                weights.push(wt);
                angles.push(nominal - t);
                weights.push(wt);
            }
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);
        Ok(Self { angles, weights })
    }

    pub fn len(&self) -> usize {
        self.angles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.angles.is_empty()
    }

    /// `sum_i w_i exp(j pi lag sin(angle_i))`, one entry per lag `0..n`.
    pub fn autocorrelation(&self, n: usize) -> Vec<Complex<f64>> {
        let mut r = vec![Complex::new(0.0, 0.0); n];
        for (&phi, &w) in self.angles.iter().zip(&self.weights) {
            let step = Complex::from_polar(1.0, PI * phi.sin());
            let mut z = Complex::new(w, 0.0);
            for r_lag in r.iter_mut() {
                *r_lag += z;
                z *= step;
            }
        }
        if n > 0 {
            r[0] = Complex::new(1.0, 0.0);
        }
        r
    }

    /// Draws `sum_i sqrt(w_i) g_i steering(angle_i)` with i.i.d. `g_i ~ CN(0, 1)`,
    /// whose covariance is exactly the discretized covariance matrix.
    pub fn draw<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Complex<f64>> {
        let mut h = vec![Complex::new(0.0, 0.0); n];
        for (&phi, &w) in self.angles.iter().zip(&self.weights) {
            let g = complex_normal(rng) * w.sqrt();
            let step = Complex::from_polar(1.0, PI * phi.sin());
            let mut z = g;
            for h_m in h.iter_mut() {
                *h_m += z;
                z *= step;
            }
        }
        h
    }
}

/// `n x n` covariance `E[a(phi) a(phi)^H]` under the truncated Laplacian density.
pub fn laplacian_covariance<T: Real>(n: usize, nominal_angle: T, asd: T) -> Result<CMat<T>> {
    if n == 0 {
        return Err(Error::InvalidArgument("covariance dimension must be positive".into()));
    }
    let quad = AngularQuadrature::laplacian(nominal_angle.as_f64(), asd.as_f64(), n)?;
    let r = quad.autocorrelation(n);
    Ok(CMat::from_fn(n, n, |i, j| {
        let z = if i >= j { r[i - j] } else { r[j - i].conj() };
        Complex::new(T::lit(z.re), T::lit(z.im))
    }))
}

/// Spatial correlation used when drawing Rayleigh components.
#[derive(Debug, Clone)]
pub enum SpatialModel {
    Laplacian(AngularQuadrature),
    /// Identity covariance.
    Uncorrelated,
}

impl SpatialModel {
    /// An infinite `asd` selects the uncorrelated model.
    pub fn new(nominal: f64, asd: f64, n_elems: usize) -> Result<Self> {
        if asd == f64::INFINITY {
            Ok(SpatialModel::Uncorrelated)
        } else {
            Ok(SpatialModel::Laplacian(AngularQuadrature::laplacian(nominal, asd, n_elems)?))
        }
    }

    /// One `CN(0, R)` vector of length `n`.
    pub fn draw<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<Complex<f64>> {
        match self {
            SpatialModel::Laplacian(q) => q.draw(n, rng),
            SpatialModel::Uncorrelated => (0..n).map(|_| complex_normal(rng)).collect(),
        }
    }
}

/// `CN(0, 1)` sample.
pub fn complex_normal<R: Rng + ?Sized>(rng: &mut R) -> Complex<f64> {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

fn default_los_angle() -> f64 {
    PI / 2.0
}

/// Geometry, fading, pathloss and power parameters of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub n_bs: usize,
    pub n_users: usize,
    pub n_ris: usize,
    pub bs_pos: [f64; 2],
    pub ris_pos: [f64; 2],
    pub user_circle_center: [f64; 2],
    pub user_circle_radius: f64,
    /// The first `n_blocked` users get `blockage_extra_db` on their direct path.
    pub n_blocked: usize,
    pub blockage_extra_db: f64,
    /// Extra direct-path loss of the remaining users.
    #[serde(default)]
    pub unblocked_extra_db: f64,
    /// Angular standard deviation in radians; `inf` means uncorrelated.
    pub asd: f64,
    pub rician_db: f64,
    pub pathloss_direct: PathlossModel,
    pub pathloss_ris_user: PathlossModel,
    pub pathloss_bs_ris: PathlossModel,
    pub noise_dbm: f64,
    pub tx_dbm: f64,
    pub seed: u64,
    #[serde(default = "default_los_angle")]
    pub los_angle_ris: f64,
    #[serde(default = "default_los_angle")]
    pub los_angle_bs: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::ris_weak()
    }
}

impl ScenarioConfig {
    /// Lower RIS impact: equal strong pathloss everywhere, 15 degree spread,
    /// users around (75, 10) m.
    pub fn ris_weak() -> Self {
        Self {
            n_bs: 6,
            n_users: 6,
            n_ris: 64,
            bs_pos: [0.0, 0.0],
            ris_pos: [100.0, 0.0],
            user_circle_center: [75.0, 10.0],
            user_circle_radius: 5.0,
            n_blocked: 3,
            blockage_extra_db: 60.0,
            unblocked_extra_db: 0.0,
            asd: 15f64.to_radians(),
            rician_db: 0.0,
            pathloss_direct: PathlossModel::strong(),
            pathloss_ris_user: PathlossModel::strong(),
            pathloss_bs_ris: PathlossModel::strong(),
            noise_dbm: -110.0,
            tx_dbm: 30.0,
            seed: 1,
            los_angle_ris: PI / 2.0,
            los_angle_bs: PI / 2.0,
        }
    }

    /// Same geometry as [`ScenarioConfig::ris_weak`]; meant for an `asd` sweep.
    pub fn orthogonality() -> Self {
        Self::ris_weak()
    }

    /// Users moved to (95, 10) m, 30 degree spread, weak direct links and a
    /// LOS BS-RIS link.
    pub fn stronger_impact() -> Self {
        Self {
            user_circle_center: [95.0, 10.0],
            asd: 30f64.to_radians(),
            pathloss_direct: PathlossModel::weak(),
            pathloss_bs_ris: PathlossModel::los(),
            ..Self::ris_weak()
        }
    }

    /// [`ScenarioConfig::stronger_impact`] with 20 dB extra direct loss for
    /// the unblocked users.
    pub fn very_strong_impact() -> Self {
        Self {
            unblocked_extra_db: 20.0,
            ..Self::stronger_impact()
        }
    }

    pub fn preset(name: &str) -> Option<Self> {
        match name {
            "ris_weak" | "default" => Some(Self::ris_weak()),
            "orthogonality" => Some(Self::orthogonality()),
            "stronger_impact" => Some(Self::stronger_impact()),
            "very_strong_impact" => Some(Self::very_strong_impact()),
            _ => None,
        }
    }

    pub const PRESETS: [&'static str; 4] = [
        "ris_weak",
        "orthogonality",
        "stronger_impact",
        "very_strong_impact",
    ];

    /// Noise power in mW.
    pub fn noise_mw(&self) -> f64 {
        10f64.powf(self.noise_dbm / 10.0)
    }

    /// Transmit power in mW.
    pub fn tx_mw(&self) -> f64 {
        10f64.powf(self.tx_dbm / 10.0)
    }

    /// Validates every field; errors carry the offending field path
    /// relative to `prefix`.
    pub fn validate_at(&self, prefix: &str) -> Result<()> {
        let f = |name: &str| {
            if prefix.is_empty() {
                name.to_string()
            } else {
                format!("{prefix}.{name}")
            }
        };
        for (name, v) in [("n_bs", self.n_bs), ("n_users", self.n_users), ("n_ris", self.n_ris)] {
            if v == 0 {
                return Err(Error::config(f(name), "must be positive"));
            }
        }
        for (name, p) in [
            ("bs_pos", self.bs_pos),
            ("ris_pos", self.ris_pos),
            ("user_circle_center", self.user_circle_center),
        ] {
            if !p.iter().all(|x| x.is_finite()) {
                return Err(Error::config(f(name), "coordinates must be finite"));
            }
        }
        if !(self.user_circle_radius.is_finite() && self.user_circle_radius > 0.0) {
            return Err(Error::config(f("user_circle_radius"), "must be positive and finite"));
        }
        if self.n_blocked > self.n_users {
            return Err(Error::config(
                f("n_blocked"),
                format!("{} exceeds n_users = {}", self.n_blocked, self.n_users),
            ));
        }
        if self.blockage_extra_db.is_nan() || self.blockage_extra_db < 0.0 {
            return Err(Error::config(f("blockage_extra_db"), "must be nonnegative"));
        }
        if !(self.unblocked_extra_db.is_finite() && self.unblocked_extra_db >= 0.0) {
            return Err(Error::config(f("unblocked_extra_db"), "must be finite and nonnegative"));
        }
        if self.asd.is_nan() || self.asd < 0.0 {
            return Err(Error::config(f("asd"), "must be nonnegative (inf = uncorrelated)"));
        }
        for (name, v) in [
            ("rician_db", self.rician_db),
            ("noise_dbm", self.noise_dbm),
            ("tx_dbm", self.tx_dbm),
            ("los_angle_ris", self.los_angle_ris),
            ("los_angle_bs", self.los_angle_bs),
        ] {
            if !v.is_finite() {
                return Err(Error::config(f(name), "must be finite"));
            }
        }
        for (name, m) in [
            ("pathloss_direct", &self.pathloss_direct),
            ("pathloss_ris_user", &self.pathloss_ris_user),
            ("pathloss_bs_ris", &self.pathloss_bs_ris),
        ] {
            m.validate().map_err(|e| Error::config(f(name), e.to_string()))?;
        }
        let min_dist = |p: [f64; 2]| {
            let dx = p[0] - self.user_circle_center[0];
            let dy = p[1] - self.user_circle_center[1];
            (dx * dx + dy * dy).sqrt()
        };
        if min_dist(self.bs_pos) <= self.user_circle_radius {
            return Err(Error::config(f("user_circle_radius"), "user circle contains the BS"));
        }
        if min_dist(self.ris_pos) <= self.user_circle_radius {
            return Err(Error::config(f("user_circle_radius"), "user circle contains the RIS"));
        }
        if distance(self.bs_pos, self.ris_pos) <= 0.0 {
            return Err(Error::config(f("ris_pos"), "RIS coincides with the BS"));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_at("")
    }
}

/// Per-user geometry of a realization.
#[derive(Debug, Clone, PartialEq)]
pub struct UserMeta {
    pub position: [f64; 2],
    pub dist_bs: f64,
    pub dist_ris: f64,
    pub angle_bs: f64,
    pub angle_ris: f64,
    pub blocked: bool,
    /// Total direct-path loss in dB, including blockage.
    pub direct_loss_db: f64,
}

/// One noise-normalized channel draw.
#[derive(Debug, Clone)]
pub struct ChannelRealization<T: Real> {
    /// `K x N_B`, rows `h_{d,k}^H`.
    pub h_direct: CMat<T>,
    /// `K x N_R`, rows `h_{r,k}^H diag(a)`.
    pub h_cascaded: CMat<T>,
    /// Unit-norm BS side of the rank-one BS-RIS link.
    pub b_vec: CVec<T>,
    /// RIS side of the BS-RIS link (already folded into `h_cascaded`).
    pub a_vec: CVec<T>,
    pub users: Vec<UserMeta>,
}

impl<T: Real> ChannelRealization<T> {
    /// Builds a realization from explicit matrices. `b` must have unit norm
    /// within `1e-9` and is renormalized exactly.
    pub fn from_parts(h_direct: CMat<T>, h_cascaded: CMat<T>, b_vec: CVec<T>) -> Result<Self> {
        let k = h_direct.nrows();
        if k == 0 {
            return Err(Error::InvalidArgument("realization needs at least one user".into()));
        }
        if h_cascaded.nrows() != k {
            return Err(Error::InvalidArgument(format!(
                "cascaded channel has {} rows, direct channel {k}",
                h_cascaded.nrows()
            )));
        }
        if b_vec.len() != h_direct.ncols() {
            return Err(Error::InvalidArgument(format!(
                "b has length {}, direct channel has {} columns",
                b_vec.len(),
                h_direct.ncols()
            )));
        }
        let nb = b_vec.norm();
        if (nb - T::one()).abs() > T::tol(1e-9) {
            return Err(Error::InvalidArgument(format!("b must have unit norm, got {}", nb.as_f64())));
        }
        let b_vec = b_vec / Complex::new(nb, T::zero());
        let n_ris = h_cascaded.ncols();
        let users = (0..k)
            .map(|_| UserMeta {
                position: [f64::NAN; 2],
                dist_bs: f64::NAN,
                dist_ris: f64::NAN,
                angle_bs: f64::NAN,
                angle_ris: f64::NAN,
                blocked: false,
                direct_loss_db: f64::NAN,
            })
            .collect();
        Ok(Self {
            h_direct,
            h_cascaded,
            b_vec,
            a_vec: CVec::from_element(n_ris, Complex::new(T::one(), T::zero())),
            users,
        })
    }

    pub fn n_users(&self) -> usize {
        self.h_direct.nrows()
    }

    pub fn n_bs(&self) -> usize {
        self.h_direct.ncols()
    }

    pub fn n_ris(&self) -> usize {
        self.h_cascaded.ncols()
    }

    /// Same direct channels with the RIS switched off (`H_c = 0`).
    pub fn without_ris(&self) -> Self {
        let mut r = self.clone();
        r.h_cascaded.fill(Complex::new(T::zero(), T::zero()));
        r
    }

    /// Validates a user subset: nonempty, in range, no duplicates.
    pub fn check_users(&self, users: &[usize]) -> Result<()> {
        if users.is_empty() {
            return Err(Error::InvalidArgument("user set is empty".into()));
        }
        let k = self.n_users();
        let mut seen = vec![false; k];
        for &u in users {
            if u >= k {
                return Err(Error::InvalidArgument(format!("user {u} out of range (K = {k})")));
            }
            if seen[u] {
                return Err(Error::InvalidArgument(format!("user {u} listed twice")));
            }
            seen[u] = true;
        }
        Ok(())
    }
}

fn distance(p: [f64; 2], q: [f64; 2]) -> f64 {
    ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt()
}

fn angle_from(origin: [f64; 2], p: [f64; 2]) -> f64 {
    (p[1] - origin[1]).atan2(p[0] - origin[0])
}

fn db_to_amplitude(loss_db: f64) -> f64 {
    10f64.powf(-loss_db / 20.0)
}

/// Amplitude weights of the LOS and scattered parts for a Rician factor in dB.
pub fn rician_weights(rician_db: f64) -> (f64, f64) {
    let kf = 10f64.powf(rician_db / 10.0);
    ((kf / (1.0 + kf)).sqrt(), (1.0 / (1.0 + kf)).sqrt())
}

fn to_t<T: Real>(z: Complex<f64>) -> Complex<T> {
    Complex::new(T::lit(z.re), T::lit(z.im))
}

/// Draws user positions and all channels of one realization.
pub fn draw_realization<T: Real, R: Rng + ?Sized>(
    config: &ScenarioConfig,
    rng: &mut R,
) -> Result<ChannelRealization<T>> {
    config.validate()?;
    let k = config.n_users;
    let (n_bs, n_ris) = (config.n_bs, config.n_ris);
    let inv_sigma = 1.0 / config.noise_mw().sqrt();

    // entries of a b^H carry the BS-RIS pathloss amplitude
    let d_br = distance(config.bs_pos, config.ris_pos);
    let amp_br = db_to_amplitude(pathloss_db(&config.pathloss_bs_ris, d_br)?) * (n_bs as f64).sqrt();
    let (a_vec, b_vec) = los_bs_ris::<f64>(n_ris, n_bs, config.los_angle_ris, config.los_angle_bs, amp_br)?;

    let (los_w, nlos_w) = rician_weights(config.rician_db);

    let mut h_direct = CMat::<T>::zeros(k, n_bs);
    let mut h_cascaded = CMat::<T>::zeros(k, n_ris);
    let mut users = Vec::with_capacity(k);
    for user in 0..k {
        let r = config.user_circle_radius * rng.random::<f64>().sqrt();
        let phi = 2.0 * PI * rng.random::<f64>();
        let pos = [
            config.user_circle_center[0] + r * phi.cos(),
            config.user_circle_center[1] + r * phi.sin(),
        ];
        let dist_bs = distance(config.bs_pos, pos);
        let dist_ris = distance(config.ris_pos, pos);
        let angle_bs = angle_from(config.bs_pos, pos);
        let angle_ris = angle_from(config.ris_pos, pos);
        let blocked = user < config.n_blocked;
        let extra = if blocked {
            config.blockage_extra_db
        } else {
            config.unblocked_extra_db
        };
        let direct_loss_db = pathloss_db(&config.pathloss_direct, dist_bs)? + extra;

        let g_d = db_to_amplitude(direct_loss_db) * inv_sigma;
        let h_d = SpatialModel::new(angle_bs, config.asd, n_bs)?.draw(n_bs, rng);
        for (m, z) in h_d.iter().enumerate() {
            h_direct[(user, m)] = to_t((z * g_d).conj());
        }

        let g_r = db_to_amplitude(pathloss_db(&config.pathloss_ris_user, dist_ris)?) * inv_sigma;
        let los = steering_vector::<f64>(n_ris, angle_ris)?;
        let scatter = SpatialModel::new(angle_ris, config.asd, n_ris)?.draw(n_ris, rng);
        for n in 0..n_ris {
            let h_r = (los[n] * los_w + scatter[n] * nlos_w) * g_r;
            h_cascaded[(user, n)] = to_t(h_r.conj() * a_vec[n]);
        }

        users.push(UserMeta {
            position: pos,
            dist_bs,
            dist_ris,
            angle_bs,
            angle_ris,
            blocked,
            direct_loss_db,
        });
    }

    Ok(ChannelRealization {
        h_direct,
        h_cascaded,
        b_vec: b_vec.map(to_t),
        a_vec: a_vec.map(to_t),
        users,
    })
}

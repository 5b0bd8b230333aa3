//! Spatial models: HPPP server fields, ordered BS-server distances, cluster
//! user offsets, the exclusion-zone variant and thinned D2D fields.

use std::f64::consts::PI;
use std::fmt::Write as _;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};

use crate::error::{Error, Result};
use crate::numerics::{ln_factorial, regularized_lower_gamma};

/// The interference window must be at least this many cluster radii wide so
/// that the deterministic tail correction is accurate.
pub const MIN_WINDOW_CLUSTERS: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const ORIGIN: Point = Point { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn polar(r: f64, theta: f64) -> Self {
        Point::new(r * theta.cos(), r * theta.sin())
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn dist(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn offset(self, by: Point) -> Point {
        Point::new(self.x + by.x, self.y + by.y)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryConfig {
    /// Content-server density (points per m²).
    pub lambda_c: f64,
    /// User density for D2D search (points per m²).
    pub lambda_u: f64,
    pub rc: f64,
    pub rs: f64,
    pub alpha: f64,
    pub delta: f64,
    /// Radius of the simulated interferer window (m).
    pub sim_radius: f64,
}

impl GeometryConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_c > 0.0) {
            return Err(Error::param("lambda_c", "must be positive"));
        }
        if !(self.lambda_u >= 0.0) {
            return Err(Error::param("lambda_u", "must be nonnegative"));
        }
        if !(self.rc > 0.0) {
            return Err(Error::param("rc", "must be positive"));
        }
        if !(self.rs > 0.0 && self.rs < self.rc) {
            return Err(Error::param("rs", "must satisfy 0 < rs < rc"));
        }
        if !(self.alpha > 2.0) {
            return Err(Error::param("alpha", "path-loss exponent must exceed 2"));
        }
        if !(self.delta > 1.0) {
            return Err(Error::param("delta", "exclusion factor must exceed 1"));
        }
        if !(self.sim_radius >= MIN_WINDOW_CLUSTERS * self.rc) {
            return Err(Error::param(
                "sim_radius",
                format!("window must be at least {MIN_WINDOW_CLUSTERS} cluster radii"),
            ));
        }
        Ok(())
    }

    /// Density coupling `λ_c = 0.01/(πR_c²)` used by the figure parameter sets.
    pub fn figure_density(rc: f64) -> f64 {
        0.01 / (PI * rc * rc)
    }

    pub fn exclusion_radius(&self) -> f64 {
        self.delta * self.rc
    }

    /// Mean interference from unit-power Rayleigh transmitters beyond the window.
    pub fn interference_tail_mean(&self) -> f64 {
        interference_tail_mean(self.lambda_c, self.alpha, self.sim_radius)
    }
}

impl Default for GeometryConfig {
    fn default() -> Self {
        GeometryConfig {
            lambda_c: Self::figure_density(50.0),
            lambda_u: 5e-5,
            rc: 50.0,
            rs: 25.0,
            alpha: 3.0,
            delta: 1.1,
            sim_radius: 5000.0,
        }
    }
}

/// `E[I_tail] = 2πλ W^{2-α}/(α-2)` for a unit-mean field outside radius `w`.
pub fn interference_tail_mean(lambda: f64, alpha: f64, w: f64) -> f64 {
    2.0 * PI * lambda * w.powf(2.0 - alpha) / (alpha - 2.0)
}

/// Upper bound on `|ln E[e^{-sI_tail}] + s E[I_tail]|`, the Laplace-exponent
/// error left after replacing the out-of-window field by its mean.
pub fn window_bias_bound(lambda: f64, alpha: f64, w: f64, s: f64) -> f64 {
    2.0 * PI * lambda * s * s * w.powf(2.0 - 2.0 * alpha) / (2.0 * alpha - 2.0)
}

pub fn uniform_in_disc<R: Rng + ?Sized>(radius: f64, rng: &mut R) -> Point {
    uniform_in_ring(0.0, radius, rng)
}

pub fn uniform_in_ring<R: Rng + ?Sized>(inner: f64, outer: f64, rng: &mut R) -> Point {
    let u: f64 = rng.random();
    let r = (inner * inner + u * (outer * outer - inner * inner)).sqrt();
    let theta = 2.0 * PI * rng.random::<f64>();
    Point::polar(r, theta)
}

pub fn exp1<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    Exp1.sample(rng)
}

pub fn poisson_count<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> usize {
    if mean <= 0.0 {
        return 0;
    }
    let d = Poisson::new(mean).expect("positive finite mean");
    d.sample(rng) as usize
}

/// Exact ordered HPPP distances outside an exclusion disc:
/// `r_k² = e² + Σ_{j≤k} E_j` with `E_j ~ Exp(λπ)`.
pub fn sample_ordered_distances<R: Rng + ?Sized>(
    lambda: f64,
    count: usize,
    inner_exclusion: f64,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if !(lambda > 0.0) {
        return Err(Error::param("lambda", "must be positive"));
    }
    if count == 0 {
        return Err(Error::param("count", "must be at least 1"));
    }
    if !(inner_exclusion >= 0.0) {
        return Err(Error::param("inner_exclusion", "must be nonnegative"));
    }
    let rate = lambda * PI;
    let mut r2 = inner_exclusion * inner_exclusion;
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        r2 += exp1(rng) / rate;
        out.push(r2.sqrt());
    }
    Ok(out)
}

/// Joint pdf of the `m`-th and `t`-th nearest distances of an HPPP.
pub fn joint_pdf_rm_rt(x: f64, y: f64, m: u32, t: u32, lambda_c: f64) -> Result<f64> {
    if m == 0 || m >= t {
        return Err(Error::param("m", "joint pdf needs 1 <= m < t"));
    }
    if x < 0.0 || y < 0.0 || x > y || x == 0.0 {
        return Ok(0.0);
    }
    let lp = lambda_c * PI;
    let gap = t - m - 1;
    let diff = y * y - x * x;
    if gap > 0 && diff <= 0.0 {
        return Ok(0.0);
    }
    let mut ln = 4f64.ln() + y.ln() + t as f64 * lp.ln() - lp * y * y + (2 * m - 1) as f64 * x.ln()
        - ln_factorial(gap)
        - ln_factorial(m - 1);
    if gap > 0 {
        ln += gap as f64 * diff.ln();
    }
    Ok(ln.exp())
}

/// Marginal pdf of the `m`-th nearest server distance outside an exclusion disc.
pub fn marginal_pdf_rm(x: f64, m: u32, lambda_c: f64, inner_exclusion: f64) -> f64 {
    if m == 0 || x < inner_exclusion || x <= 0.0 {
        return 0.0;
    }
    let u = lambda_c * PI * (x * x - inner_exclusion * inner_exclusion);
    let ln_poly = if m == 1 {
        0.0
    } else if u <= 0.0 {
        return 0.0;
    } else {
        (m - 1) as f64 * u.ln() - ln_factorial(m - 1)
    };
    2.0 * PI * lambda_c * x * (ln_poly - u).exp()
}

/// `P(r_m ≤ x)`, the regularized gamma integral of [`marginal_pdf_rm`].
pub fn marginal_cdf_rm(x: f64, m: u32, lambda_c: f64, inner_exclusion: f64) -> f64 {
    if x <= inner_exclusion {
        return 0.0;
    }
    let u = lambda_c * PI * (x * x - inner_exclusion * inner_exclusion);
    regularized_lower_gamma(m as f64, u).unwrap_or(1.0)
}

/// Smallest `x` with `P(r_m > x) < tail`, found by bisection on the CDF.
pub fn marginal_tail_cut(m: u32, lambda_c: f64, inner_exclusion: f64, tail: f64) -> f64 {
    let mut lo = inner_exclusion;
    let mut hi = inner_exclusion.max(1.0);
    while 1.0 - marginal_cdf_rm(hi, m, lambda_c, inner_exclusion) >= tail {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if 1.0 - marginal_cdf_rm(mid, m, lambda_c, inner_exclusion) >= tail {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    hi
}

/// Density of the distance between the BS and a user placed uniformly in a
/// disc of radius `rc` centred `r_m` away from the BS.
pub fn conditional_pdf_user_bs_distance(r: f64, r_m: f64, rc: f64) -> Result<f64> {
    if !(r_m > rc) {
        return Err(Error::param("r_m", "cluster centre must lie outside its own disc"));
    }
    if r < r_m - rc || r > r_m + rc || r <= 0.0 {
        return Ok(0.0);
    }
    let arg = (r_m * r_m + r * r - rc * rc) / (2.0 * r_m * r);
    if arg.abs() > 1.0 + 1e-12 {
        return Err(Error::param("r", format!("arccos argument {arg} outside [-1, 1]")));
    }
    Ok(2.0 * r * arg.clamp(-1.0, 1.0).acos() / (PI * rc * rc))
}

pub fn thinned_density<F: Fn(f64) -> f64>(r: f64, retain_prob: F, lambda_u: f64) -> Result<f64> {
    let p = retain_prob(r);
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::param("retain_prob", format!("value {p} at r = {r} is not a probability")));
    }
    Ok(p * lambda_u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UserRole {
    User,
    Near,
    Far,
}

impl UserRole {
    fn as_str(self) -> &'static str {
        match self {
            UserRole::User => "user",
            UserRole::Near => "near",
            UserRole::Far => "far",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UserOffset {
    pub role: UserRole,
    pub offset: Point,
}

/// One realization of the cluster deployment around a BS at the origin.
#[derive(Debug, Clone, PartialEq)]
pub struct DeploymentSample {
    pub ordered_server_r: Vec<f64>,
    pub server_positions: Vec<Point>,
    pub user_offsets: Vec<Vec<UserOffset>>,
    /// `fading[tx][rx]`: tx 0 is the BS, tx k+1 is server k; rx indexes users
    /// in cluster order.
    pub fading: Vec<Vec<f64>>,
}

impl DeploymentSample {
    pub fn user_count(&self) -> usize {
        self.user_offsets.iter().map(Vec::len).sum()
    }

    pub fn fading(&self, tx: usize, rx: usize) -> f64 {
        self.fading[tx][rx]
    }

    /// Absolute user positions with their cluster index.
    pub fn user_positions(&self) -> Vec<(usize, UserRole, Point)> {
        let mut out = Vec::with_capacity(self.user_count());
        for (k, users) in self.user_offsets.iter().enumerate() {
            for u in users {
                out.push((k, u.role, self.server_positions[k].offset(u.offset)));
            }
        }
        out
    }

    /// Line-oriented dump: `role cluster x y`, absolute coordinates in meters.
    pub fn to_text(&self) -> String {
        let mut s = String::from("bs 0 0 0\n");
        for (k, p) in self.server_positions.iter().enumerate() {
            let _ = writeln!(s, "server {k} {} {}", p.x, p.y);
        }
        for (k, role, p) in self.user_positions() {
            let _ = writeln!(s, "{} {k} {} {}", role.as_str(), p.x, p.y);
        }
        s
    }
}

/// A parsed line of the deployment text form.
#[derive(Debug, Clone, PartialEq)]
pub struct PointRecord {
    pub role: String,
    pub cluster: usize,
    pub position: Point,
}

pub fn parse_deployment_text(text: &str) -> Result<Vec<PointRecord>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let bad = || Error::Parse(format!("line {}: expected `role cluster x y`", i + 1));
        if fields.len() != 4 {
            return Err(bad());
        }
        if !matches!(fields[0], "bs" | "server" | "user" | "near" | "far") {
            return Err(bad());
        }
        out.push(PointRecord {
            role: fields[0].to_string(),
            cluster: fields[1].parse().map_err(|_| bad())?,
            position: Point::new(fields[2].parse().map_err(|_| bad())?, fields[3].parse().map_err(|_| bad())?),
        });
    }
    Ok(out)
}

/// Draws servers as an HPPP in the window, places users in each cluster and
/// draws unit-mean exponential gains for every transmitter-user pair.
pub fn sample_cluster_deployment<R: Rng + ?Sized>(
    config: &GeometryConfig,
    users_per_cluster: usize,
    near_far_split: bool,
    min_servers: usize,
    rng: &mut R,
) -> Result<DeploymentSample> {
    config.validate()?;
    if near_far_split && users_per_cluster != 2 {
        return Err(Error::param("users_per_cluster", "near/far split needs exactly two users"));
    }
    let w = config.sim_radius;
    let n = poisson_count(config.lambda_c * PI * w * w, rng);
    if n < min_servers {
        return Err(Error::param("sim_radius", format!("window holds {n} servers but {min_servers} were requested")));
    }
    let mut servers: Vec<Point> = (0..n).map(|_| uniform_in_disc(w, rng)).collect();
    // stable sort keeps draw order on exact ties
    servers.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    let ordered_server_r = servers.iter().map(|p| p.norm()).collect();

    let mut user_offsets = Vec::with_capacity(n);
    for _ in 0..n {
        let users = if near_far_split {
            vec![
                UserOffset { role: UserRole::Far, offset: uniform_in_ring(config.rs, config.rc, rng) },
                UserOffset { role: UserRole::Near, offset: uniform_in_disc(config.rs, rng) },
            ]
        } else {
            (0..users_per_cluster)
                .map(|_| UserOffset { role: UserRole::User, offset: uniform_in_disc(config.rc, rng) })
                .collect()
        };
        user_offsets.push(users);
    }
    let n_users = n * users_per_cluster;
    let fading = (0..=n).map(|_| (0..n_users).map(|_| exp1(rng)).collect()).collect();
    Ok(DeploymentSample { ordered_server_r, server_positions: servers, user_offsets, fading })
}

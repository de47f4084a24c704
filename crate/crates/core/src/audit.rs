//! Numerical audit of the convexity argument for a single delay-energy term
//! `B = D p / (w log2 e)` with `e = 1 + h0 p / (w sigma2 d^2 e^{a d})`.
//!
//! Every quantity of the argument is evaluated in closed form and checked
//! against independent evaluations (chain rule, finite differences,
//! eigenvalues). Violations are recorded rather than raised.

use std::f64::consts::LN_2;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};

/// Published root of `g`.
pub const G_ROOT_REFERENCE: f64 = 41.4125;
/// Published crossing of the vertex expression with 2.
pub const VERTEX_ROOT_REFERENCE: f64 = 2940.74;
/// Published bound on `e` for the typical link.
pub const EN_BOUND_REFERENCE: f64 = 23.781;
/// Upper end of the region where convexity is claimed.
pub const SNR_PLUS_ONE_LIMIT: f64 = 24.0;

/// `g(e) = 4e - 4 - e ln e - 2 ln e`.
pub fn g_function(e: f64) -> Result<f64> {
    if !(e > 0.0) {
        return Err(Error::domain(format!("g is defined for e > 0, got {e}")));
    }
    let le = e.ln();
    Ok(4.0 * e - 4.0 - e * le - 2.0 * le)
}

fn g(e: f64) -> f64 {
    let le = e.ln();
    4.0 * e - 4.0 - e * le - 2.0 * le
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let flo = f(lo);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if (f(mid) > 0.0) == (flo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Nonzero root of `g`, by bisection on [2, 100] to 1e-6.
pub fn find_g_root() -> f64 {
    bisect(g, 2.0, 100.0, 1e-6)
}

/// Nonzero root of `g` by Newton's method, `g'(e) = 3 - ln e - 2/e`.
pub fn newton_g_root(start: f64) -> f64 {
    let mut e = start;
    for _ in 0..100 {
        let step = g(e) / (3.0 - e.ln() - 2.0 / e);
        e -= step;
        if step.abs() <= 1e-14 * e {
            break;
        }
    }
    e
}

/// Minimizer of `I1` as a quadratic in `a d + 2`.
pub fn vertex_expression(e: f64) -> f64 {
    let le = e.ln();
    e * le / (2.0 * (2.0 * e - le - 2.0))
}

/// Crossing of the vertex expression with 2, by bisection on [100, 1e4].
pub fn find_vertex_root() -> f64 {
    bisect(|e| vertex_expression(e) - 2.0, 100.0, 1e4, 1e-9)
}

/// `I1` as a function of `A = a d + 2` at fixed `e`.
pub fn i1_of(e: f64, amp: f64) -> f64 {
    let le = e.ln();
    (2.0 * e - le - 2.0) * amp * amp - e * le * amp - 2.0 * e * le
}

/// One delay-energy term and the point where it is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AppendixInput {
    pub absorption: f64,
    pub altitude: f64,
    /// UAV minus user, horizontal, m.
    pub dx: f64,
    pub dy: f64,
    pub power: f64,
    pub bandwidth: f64,
    pub payload: f64,
    pub h0: f64,
    pub sigma2: f64,
}

impl AppendixInput {
    pub fn distance(&self) -> f64 {
        (self.dx * self.dx + self.dy * self.dy + self.altitude * self.altitude).sqrt()
    }

    /// Bandwidth at which the term's `e` equals `target`.
    pub fn bandwidth_for(&self, target: f64) -> f64 {
        let d = self.distance();
        self.h0 * self.power / (self.sigma2 * (target - 1.0) * d * d * (self.absorption * d).exp())
    }

    fn snr_plus_one_at(&self, dx: f64, dy: f64) -> f64 {
        let d2 = dx * dx + dy * dy + self.altitude * self.altitude;
        let d = d2.sqrt();
        1.0 + self.h0 * self.power / (self.bandwidth * self.sigma2 * d2 * (self.absorption * d).exp())
    }

    /// `B` evaluated from the geometry, with the UAV offset by (dx, dy).
    pub fn value_at(&self, dx: f64, dy: f64) -> f64 {
        let e = self.snr_plus_one_at(dx, dy);
        self.payload * self.power * LN_2 / (self.bandwidth * (e - 1.0).ln_1p())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AppendixQuantities {
    pub d: f64,
    pub e: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "dB_de")]
    pub db_de: f64,
    #[serde(rename = "d2B_de2")]
    pub d2b_de2: f64,
    pub de_dd: f64,
    pub d2e_dd2: f64,
    /// Second x-derivative from the chain rule.
    #[serde(rename = "d2B_dx2")]
    pub d2b_dx2: f64,
    /// Second x-derivative from the factored form with `I`.
    #[serde(rename = "d2B_dx2_factored")]
    pub d2b_dx2_factored: f64,
    pub hessian: [[f64; 2]; 2],
    #[serde(rename = "I")]
    pub i: f64,
    #[serde(rename = "I1")]
    pub i1: f64,
    /// `I1` at `a d + 2 = 2`, the left end of its range.
    #[serde(rename = "I1_min")]
    pub i1_min: f64,
    pub z: f64,
    pub z_max: f64,
    pub z_star: f64,
    pub z_star_min: f64,
    pub g_of_e: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "S")]
    pub s: f64,
    #[serde(rename = "S1")]
    pub s1: f64,
    /// Lower bound on `L` obtained by replacing `S` with `S1`.
    #[serde(rename = "L_bound")]
    pub l_bound: f64,
    #[serde(rename = "G1")]
    pub g1: f64,
}

pub fn appendix_quantities(t: &AppendixInput) -> Result<AppendixQuantities> {
    let d = t.distance();
    let e = t.snr_plus_one_at(t.dx, t.dy);
    if !(e > 1.0) || !e.is_finite() {
        return Err(Error::domain(format!("e must exceed one, got {e}")));
    }
    let (a, h, dp, w) = (t.absorption, t.altitude, t.payload * t.power, t.bandwidth);
    let le = (e - 1.0).ln_1p();
    let ead = (a * d).exp();
    let amp = a * d + 2.0;
    let snr_scale = t.h0 * t.power / (w * t.sigma2);

    let b = dp * LN_2 / (w * le);
    let db_de = -dp * LN_2 / (w * e * le * le);
    let d2b_de2 = dp * LN_2 * (le + 2.0) / (w * e * e * le.powi(3));
    let de_dd = -snr_scale * amp / (d.powi(3) * ead);
    let d2e_dd2 = snr_scale * (a * a * d * d + 4.0 * a * d + 6.0) / (d.powi(4) * ead);

    let b_d = db_de * de_dd;
    let b_dd = d2b_de2 * de_dd * de_dd + db_de * d2e_dd2;
    let u = [t.dx, t.dy];
    let mut hessian = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            let delta = if i == j { 1.0 } else { 0.0 };
            hessian[i][j] = b_dd * u[i] * u[j] / (d * d) + b_d * (delta / d - u[i] * u[j] / d.powi(3));
        }
    }
    let c = t.dx / d;
    let d2b_dx2 = d2b_de2 * de_dd * de_dd * c * c + db_de * (d2e_dd2 * c * c + de_dd * (d * d - t.dx * t.dx) / d.powi(3));

    let z = t.dx * t.dx;
    let i1 = i1_of(e, amp);
    let i1_min = i1_of(e, 2.0);
    let intercept = amp * d * d * e * le;
    let i = i1 * z + intercept;
    let d2b_dx2_factored = i * dp * LN_2 * (e - 1.0) / (w * e * e * d.powi(4) * le.powi(3));
    let z_max = snr_scale / (e - 1.0);
    let z_star = intercept / -i1;
    let z_star_min = intercept / -i1_min;

    let s = (2.0 * e - 2.0 - le) * amp * amp - 2.0 * e * le;
    let s1 = (2.0 * e - 2.0 - le) * 4.0 - 2.0 * e * le;
    let tail = h * h * e * le * amp;
    let l = (d * d - h * h) * s + tail;
    let l_bound = (d * d - h * h) * s1 + tail;
    let g1 = (dp * (e - 1.0) * LN_2).powi(2) * amp * l / (w * w * e.powi(3) * le.powi(5) * d.powi(6));

    Ok(AppendixQuantities {
        d,
        e,
        b,
        db_de,
        d2b_de2,
        de_dd,
        d2e_dd2,
        d2b_dx2,
        d2b_dx2_factored,
        hessian,
        i,
        i1,
        i1_min,
        z,
        z_max,
        z_star,
        z_star_min,
        g_of_e: g(e),
        l,
        s,
        s1,
        l_bound,
        g1,
    })
}

/// Hessian of `B` in the UAV position by Richardson-extrapolated central
/// differences.
pub fn finite_difference_hessian(t: &AppendixInput, step: f64) -> [[f64; 2]; 2] {
    let f = |x: f64, y: f64| t.value_at(t.dx + x, t.dy + y);
    let at = |h: f64| {
        let f0 = f(0.0, 0.0);
        let xx = (f(h, 0.0) - 2.0 * f0 + f(-h, 0.0)) / (h * h);
        let yy = (f(0.0, h) - 2.0 * f0 + f(0.0, -h)) / (h * h);
        let xy = (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4.0 * h * h);
        [[xx, xy], [xy, yy]]
    };
    let (coarse, fine) = (at(step), at(0.5 * step));
    let mut out = [[0.0; 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            out[i][j] = (4.0 * fine[i][j] - coarse[i][j]) / 3.0;
        }
    }
    out
}

/// Smallest eigenvalue of a symmetric 2x2 matrix.
pub fn min_eigenvalue(m: &[[f64; 2]; 2]) -> f64 {
    let half_trace = 0.5 * (m[0][0] + m[1][1]);
    let half_gap = 0.5 * (m[0][0] - m[1][1]);
    half_trace - half_gap.hypot(m[0][1])
}

fn det(m: &[[f64; 2]; 2]) -> f64 {
    m[0][0] * m[1][1] - m[0][1] * m[1][0]
}

fn max_abs(m: &[[f64; 2]; 2]) -> f64 {
    m.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Outcome of checking one claim over a set of samples.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClaimVerdict {
    pub claim_id: String,
    pub samples: usize,
    pub violations: usize,
    /// Smallest margin seen; negative exactly when some sample violates.
    pub worst_margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub observed: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reference: Option<f64>,
}

impl ClaimVerdict {
    fn new(claim_id: &str) -> Self {
        ClaimVerdict {
            claim_id: claim_id.to_string(),
            samples: 0,
            violations: 0,
            worst_margin: f64::INFINITY,
            observed: None,
            reference: None,
        }
    }

    /// Records one sample; `margin >= 0` passes.
    fn record(&mut self, margin: f64) {
        self.samples += 1;
        if !(margin >= 0.0) {
            self.violations += 1;
        }
        if margin.is_nan() {
            self.worst_margin = f64::NAN;
        } else if !self.worst_margin.is_nan() {
            self.worst_margin = self.worst_margin.min(margin);
        }
    }

    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub claims: Vec<ClaimVerdict>,
    pub overall_pass: bool,
}

impl AuditReport {
    pub fn from_claims(claims: Vec<ClaimVerdict>) -> Self {
        let overall_pass = claims.iter().all(ClaimVerdict::passed);
        AuditReport { claims, overall_pass }
    }

    pub fn claim(&self, id: &str) -> Option<&ClaimVerdict> {
        self.claims.iter().find(|c| c.claim_id == id)
    }
}

const H0: f64 = 1e-4;
const SIGMA2: f64 = 3.981_071_705_534_972e-21;

/// Random term with `1 < e < 24`: absorption in [0.0025, 0.0125] 1/m,
/// altitude in [10, 30] m, user and UAV on a 50 m square, power in
/// [1e-4, 0.1] W; the bandwidth is chosen to hit a uniform target `e`.
pub fn sample_input(rng: &mut impl Rng) -> AppendixInput {
    let mut t = AppendixInput {
        absorption: rng.gen_range(0.0025..=0.0125),
        altitude: rng.gen_range(10.0..=30.0),
        dx: rng.gen_range(0.0..50.0) - rng.gen_range(0.0..50.0),
        dy: rng.gen_range(0.0..50.0) - rng.gen_range(0.0..50.0),
        power: rng.gen_range(1e-4..=0.1),
        bandwidth: 0.0,
        payload: rng.gen_range(1e12..=1e13),
        h0: H0,
        sigma2: SIGMA2,
    };
    let target = rng.gen_range(1.001..SNR_PLUS_ONE_LIMIT);
    t.bandwidth = t.bandwidth_for(target);
    t
}

fn samples_from(seed: u64, count: usize) -> Vec<AppendixInput> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| sample_input(&mut rng)).collect()
}

fn fd_step(t: &AppendixInput) -> f64 {
    1e-2 * t.distance()
}

/// Claims about the first-order determinant `d2B/dx2`.
pub fn audit_first_determinant(samples: usize, seed: u64) -> Vec<ClaimVerdict> {
    let mut positive_i = ClaimVerdict::new("first_det.I_positive");
    let mut positive_b = ClaimVerdict::new("first_det.d2B_dx2_positive");
    let mut factored = ClaimVerdict::new("first_det.factored_form_matches_chain_rule");
    let mut fd = ClaimVerdict::new("first_det.matches_finite_differences");
    let mut case2 = ClaimVerdict::new("first_det.case2_zstar_min_exceeds_zmax");
    let mut unity = ClaimVerdict::new("first_det.near_unity_limit");

    for (n, t) in samples_from(seed, samples).iter().enumerate() {
        let Ok(q) = appendix_quantities(t) else {
            positive_i.record(f64::NAN);
            continue;
        };
        positive_i.record(q.i / (q.i1.abs() * q.z + q.i.abs()).max(f64::MIN_POSITIVE));
        positive_b.record(q.d2b_dx2.signum() * 1.0_f64.min(q.d2b_dx2.abs() / max_abs(&q.hessian)));
        factored.record(1e-9 - (q.d2b_dx2 - q.d2b_dx2_factored).abs() / q.d2b_dx2.abs());
        if n < 100 {
            let h = finite_difference_hessian(t, fd_step(t));
            fd.record(1e-4 - (q.d2b_dx2 - h[0][0]).abs() / q.d2b_dx2.abs());
        }
        if q.i1 < 0.0 {
            case2.record((q.z_star_min - q.z_max) / q.z_max);
        }
    }

    // along rays toward e = 1, I / ln e tends to (A - 2)(A + 1) z + A d^2 > 0
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    for _ in 0..20 {
        let base = sample_input(&mut rng);
        let d = base.distance();
        let amp = base.absorption * d + 2.0;
        let z = base.dx * base.dx;
        let limit = (amp - 2.0) * (amp + 1.0) * z + amp * d * d;
        let mut last = f64::NAN;
        for eps in [1e-2, 1e-4, 1e-6, 1e-8] {
            let t = AppendixInput { bandwidth: base.bandwidth_for(1.0 + eps), ..base };
            if let Ok(q) = appendix_quantities(&t) {
                unity.record(q.i / (q.i1.abs() * q.z + q.i.abs()));
                last = q.i / (q.e - 1.0).ln_1p();
            }
        }
        unity.record(1e-3 - (last - limit).abs() / limit);
    }

    vec![positive_i, positive_b, factored, fd, case2, unity]
}

/// Claims about the second-order determinant `G1` and the full Hessian.
pub fn audit_second_determinant(samples: usize, seed: u64) -> Vec<ClaimVerdict> {
    let mut positive = ClaimVerdict::new("second_det.G1_positive");
    let mut vs_fd = ClaimVerdict::new("second_det.G1_matches_fd_determinant");
    let mut hess_fd = ClaimVerdict::new("second_det.hessian_matches_finite_differences");
    let mut bound = ClaimVerdict::new("second_det.L_lower_bound");
    let mut s1 = ClaimVerdict::new("second_det.S1_equals_2g");
    let mut psd = ClaimVerdict::new("second_det.hessian_psd");

    for t in samples_from(seed, samples) {
        let Ok(q) = appendix_quantities(&t) else {
            positive.record(f64::NAN);
            continue;
        };
        positive.record(q.g1.signum() * 1.0_f64.min(q.l.abs() / (q.l.abs() + q.l_bound.abs())));
        let h = finite_difference_hessian(&t, fd_step(&t));
        vs_fd.record(1e-3 - (q.g1 - det(&h)).abs() / q.g1.abs());
        let scale = max_abs(&q.hessian);
        let worst = (0..2)
            .flat_map(|i| (0..2).map(move |j| (i, j)))
            .map(|(i, j)| (q.hessian[i][j] - h[i][j]).abs() / scale)
            .fold(0.0, f64::max);
        hess_fd.record(1e-4 - worst);
        bound.record((q.l - q.l_bound) / q.l.abs() + 1e-12);
        s1.record(1e-12 - (q.s1 - 2.0 * q.g_of_e).abs() / q.s1.abs().max(1.0));
        psd.record(min_eigenvalue(&q.hessian) + 1e-10);
    }
    vec![positive, vs_fd, hess_fd, bound, s1, psd]
}

/// Largest `e` over d in [10, 200] m (0.01 m step) for the typical link:
/// a = 0.005 1/m, w = 10 GHz, p = 1 mW, h0 = -40 dB, sigma2 = -174 dBm/Hz.
pub fn audit_en_bound() -> Vec<ClaimVerdict> {
    let (a, w, p) = (0.005, 10e9, 1e-3);
    let e_at = |d: f64| 1.0 + H0 * p / (w * SIGMA2 * d * d * (a * d).exp());
    let mut bound = ClaimVerdict::new("en_bound.max_at_most_24");
    let mut at_ten = ClaimVerdict::new("en_bound.max_at_10m");
    let (mut best, mut best_d) = (f64::NEG_INFINITY, f64::NAN);
    for i in 0..=19_000 {
        let d = 10.0 + i as f64 * 0.01;
        let e = e_at(d);
        bound.record(SNR_PLUS_ONE_LIMIT - e);
        if e > best {
            best = e;
            best_d = d;
        }
    }
    bound.observed = Some(best);
    bound.reference = Some(EN_BOUND_REFERENCE);
    at_ten.record(if best_d == 10.0 { 0.0 } else { -(best_d - 10.0) });
    at_ten.observed = Some(best_d);
    vec![bound, at_ten]
}

/// Shape of `I1` and of its vertex.
pub fn audit_i1_shape(samples: usize, seed: u64) -> Vec<ClaimVerdict> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut below = ClaimVerdict::new("I1_shape.vertex_below_2");
    for _ in 0..samples {
        // half uniform, half log-uniform so that both ends are covered
        let e = if rng.gen::<bool>() {
            rng.gen_range(1.0..2940.0)
        } else {
            2940f64.powf(rng.gen::<f64>())
        };
        if e > 1.0 {
            below.record(2.0 - vertex_expression(e));
        }
    }
    let mut root = ClaimVerdict::new("I1_shape.vertex_root");
    let r = find_vertex_root();
    root.record(1.0 - (r - VERTEX_ROOT_REFERENCE).abs());
    root.observed = Some(r);
    root.reference = Some(VERTEX_ROOT_REFERENCE);

    let mut increasing = ClaimVerdict::new("I1_shape.increasing_in_ad_plus_2");
    for _ in 0..samples {
        let e = rng.gen_range(1.001..SNR_PLUS_ONE_LIMIT);
        let mut prev = i1_of(e, 2.0);
        for k in 1..=100 {
            let next = i1_of(e, 2.0 + 2.0 * k as f64 / 100.0);
            increasing.record((next - prev) / prev.abs().max(next.abs()));
            prev = next;
        }
    }
    vec![below, root, increasing]
}

/// Root of `g` and its sign on (1, e*).
pub fn audit_g(samples: usize, seed: u64) -> Vec<ClaimVerdict> {
    let mut root = ClaimVerdict::new("g.root");
    let r = find_g_root();
    root.record(1e-3 - (r - G_ROOT_REFERENCE).abs());
    root.observed = Some(r);
    root.reference = Some(G_ROOT_REFERENCE);
    let mut positive = ClaimVerdict::new("g.positive_below_root");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..samples {
        let e = rng.gen_range(1.0..41.41);
        if e > 1.0 {
            positive.record(g(e));
        }
    }
    vec![root, positive]
}

/// Runs every claim with `samples` random draws each.
pub fn run_audit(samples: usize, seed: u64) -> AuditReport {
    let mut claims = audit_g(50, seed);
    claims.extend(audit_first_determinant(samples, seed));
    claims.extend(audit_second_determinant(samples, seed.wrapping_add(1)));
    claims.extend(audit_en_bound());
    claims.extend(audit_i1_shape(samples.min(1000), seed.wrapping_add(2)));
    AuditReport::from_claims(claims)
}

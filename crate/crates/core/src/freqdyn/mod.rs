//! Post-fault frequency dynamics of the aggregated swing equation
//! `2H·Δf′ + c·Δf = ΔP(t) − P` with PFR ramping linearly to `R` over `T_d`.
//!
//! `H` is MW·s² (as produced by the post-loss inertia expression), `c` is the
//! damping product D·P^D in MW/Hz, powers are MW and deviations Hz.

use thiserror::Error;

use crate::sysmodel::FrequencyParams;

/// Default trace sampling step, s.
pub const DEFAULT_STEP: f64 = 0.01;
/// Default trace horizon, s.
pub const DEFAULT_HORIZON: f64 = 60.0;
/// Time at which the quasi-steady-state deviation is read, s.
pub const QSS_TIME: f64 = 60.0;
/// Tolerance of the security checks, Hz (Hz/s for RoCoF).
pub const SECURITY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SwingInputs {
    pub inertia: f64,
    pub damping_product: f64,
    pub pfr: f64,
    pub delivery_time: f64,
    pub loss: f64,
    pub horizon: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum SwingInputError {
    #[error("inertia must be positive, got {0}")]
    Inertia(f64),
    #[error("delivery time must be positive, got {0}")]
    DeliveryTime(f64),
    #[error("`{0}` must be finite and non-negative, got {1}")]
    Negative(&'static str, f64),
    #[error("sampling step must be positive, got {0}")]
    Step(f64),
}

/// (1 − e^{−u})/u, continuous at 0.
fn phi1(u: f64) -> f64 {
    if u < 1e-10 {
        1.0 - 0.5 * u
    } else {
        -(-u).exp_m1() / u
    }
}

/// (u − 1 + e^{−u})/u², continuous at 0.
fn phi2(u: f64) -> f64 {
    if u < 0.5 {
        // Σ (−u)^k / (k+2)!
        let mut term = 0.5;
        let mut sum = 0.0;
        for k in 0..24 {
            sum += term;
            term *= -u / (k as f64 + 3.0);
        }
        sum
    } else {
        (u + (-u).exp_m1()) / (u * u)
    }
}

/// (x − ln(1 + x))/x², continuous at 0.
fn psi(x: f64) -> f64 {
    if x < 1e-2 {
        // Σ_{k≥2} (−1)^k x^{k−2} / k
        let mut sum = 0.0;
        let mut pow = 1.0;
        for k in 2..16 {
            let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
            sum += sign * pow / k as f64;
            pow *= x;
        }
        sum
    } else {
        (x - x.ln_1p()) / (x * x)
    }
}

impl SwingInputs {
    pub fn new(inertia: f64, damping_product: f64, pfr: f64, delivery_time: f64, loss: f64) -> Self {
        Self { inertia, damping_product, pfr, delivery_time, loss, horizon: DEFAULT_HORIZON }
    }

    pub fn validate(&self) -> Result<(), SwingInputError> {
        if !(self.inertia.is_finite() && self.inertia > 0.0) {
            return Err(SwingInputError::Inertia(self.inertia));
        }
        if !(self.delivery_time.is_finite() && self.delivery_time > 0.0) {
            return Err(SwingInputError::DeliveryTime(self.delivery_time));
        }
        for (name, v) in [
            ("damping_product", self.damping_product),
            ("pfr", self.pfr),
            ("loss", self.loss),
            ("horizon", self.horizon),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(SwingInputError::Negative(name, v));
            }
        }
        Ok(())
    }

    fn a(&self) -> f64 {
        self.damping_product / (2.0 * self.inertia)
    }

    /// Closed-form Δf(t), Hz.
    pub fn deviation_at(&self, t: f64) -> f64 {
        let h2 = 2.0 * self.inertia;
        let (r, p, td) = (self.pfr, self.loss, self.delivery_time);
        let a = self.a();
        let ramp = |t: f64| (r * t * t * phi2(a * t) / td - p * t * phi1(a * t)) / h2;
        if t <= td {
            ramp(t.max(0.0))
        } else {
            let fd = ramp(td);
            let tau = t - td;
            fd + (r - p - self.damping_product * fd) * tau * phi1(a * tau) / h2
        }
    }

    /// Closed-form dΔf/dt, Hz/s.
    pub fn rocof_at(&self, t: f64) -> f64 {
        let forcing = if t < self.delivery_time { self.pfr * t / self.delivery_time } else { self.pfr };
        (forcing - self.loss - self.damping_product * self.deviation_at(t)) / (2.0 * self.inertia)
    }

    /// Time at which the ramp phase is stationary, if PFR is scheduled.
    pub fn stationary_time(&self) -> Option<f64> {
        if self.pfr <= 0.0 || self.loss <= 0.0 {
            return None;
        }
        let x = self.delivery_time * self.loss * self.damping_product / (2.0 * self.inertia * self.pfr);
        let ratio = if x < 1e-12 { 1.0 - 0.5 * x } else { x.ln_1p() / x };
        Some(self.delivery_time * self.loss / self.pfr * ratio)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SwingTrace {
    pub inputs: SwingInputs,
    pub times: Vec<f64>,
    pub deviations: Vec<f64>,
    /// Minimum of the continuous trajectory on [0, horizon], Hz.
    pub nadir: f64,
    pub nadir_time: f64,
    /// dΔf/dt at t = 0⁺, Hz/s.
    pub initial_rocof: f64,
    /// Δf at 60 s, Hz.
    pub deviation_60s: f64,
    /// No damping and less PFR than the loss: the decline never stops.
    pub diverged: bool,
}

pub fn simulate_swing(inputs: &SwingInputs) -> Result<SwingTrace, SwingInputError> {
    simulate_swing_with_step(inputs, DEFAULT_STEP)
}

pub fn simulate_swing_with_step(inputs: &SwingInputs, step: f64) -> Result<SwingTrace, SwingInputError> {
    inputs.validate()?;
    if !(step.is_finite() && step > 0.0) {
        return Err(SwingInputError::Step(step));
    }
    let (nadir, nadir_time) = nadir_of(inputs);
    let n = (inputs.horizon / step).round() as usize;
    let mut times: Vec<f64> = (0..=n).map(|k| (k as f64 * step).min(inputs.horizon)).collect();
    if times.last().copied() != Some(inputs.horizon) {
        times.push(inputs.horizon);
    }
    let deviations = times.iter().map(|&t| inputs.deviation_at(t)).collect();
    Ok(SwingTrace {
        inputs: *inputs,
        times,
        deviations,
        nadir,
        nadir_time,
        initial_rocof: -inputs.loss / (2.0 * inputs.inertia),
        deviation_60s: inputs.deviation_at(QSS_TIME),
        diverged: inputs.damping_product == 0.0 && inputs.pfr < inputs.loss,
    })
}

/// Minimum over [0, horizon]: the ramp phase has at most one stationary point
/// (a minimum) and the step phase is monotone, so the candidates are t = 0,
/// the stationary point, the end of the ramp and the horizon.
fn nadir_of(s: &SwingInputs) -> (f64, f64) {
    let end_ramp = s.delivery_time.min(s.horizon);
    let mut candidates = vec![0.0, end_ramp, s.horizon];
    if let Some(ts) = s.stationary_time() {
        if ts <= end_ramp {
            candidates.push(ts);
        }
    }
    candidates.sort_by(f64::total_cmp);
    let mut best = (0.0, 0.0);
    for t in candidates {
        let v = s.deviation_at(t);
        if v < best.0 {
            best = (v, t);
        }
    }
    best
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Check {
    pub ok: bool,
    /// Distance to the limit; negative when violated.
    pub margin: f64,
}

impl Check {
    fn new(margin: f64, tol: f64) -> Self {
        Self { ok: margin >= -tol, margin }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SecurityReport {
    pub rocof: Check,
    pub nadir: Check,
    pub qss: Check,
}

impl SecurityReport {
    pub fn secure(&self) -> bool {
        self.rocof.ok && self.nadir.ok && self.qss.ok
    }
}

pub fn check_security(trace: &SwingTrace, freq: &FrequencyParams) -> SecurityReport {
    check_security_with_tol(trace, freq, SECURITY_TOL)
}

pub fn check_security_with_tol(trace: &SwingTrace, freq: &FrequencyParams, tol: f64) -> SecurityReport {
    let nadir_margin = if trace.diverged { f64::NEG_INFINITY } else { trace.nadir + freq.df_max };
    SecurityReport {
        rocof: Check::new(freq.rocof_max - trace.initial_rocof.abs(), tol),
        nadir: Check::new(nadir_margin, tol),
        qss: Check::new(trace.deviation_60s + freq.df_ss_max, tol),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactNadir {
    pub feasible: bool,
    /// Depth of the ramp-phase stationary point below nominal, Hz.
    pub depth: f64,
    /// `df_max − depth`.
    pub margin: f64,
    pub diagnostic: Option<String>,
}

/// Evaluates the exact damped nadir condition
/// `(2HR/T_d)·ln(2HR/(T_d·P·c + 2HR)) ≤ c²·Δf_max − P·c`
/// in the equivalent form `T_d·P²·ψ(x)/(2HR) ≤ Δf_max`, with
/// `x = T_d·P·c/(2HR)` and `ψ(x) = (x − ln(1+x))/x²`. At `c = 0` this is
/// `H·R ≥ P²·T_d/(4·Δf_max)`.
pub fn exact_nadir(h: f64, r: f64, p_loss: f64, c: f64, t_d: f64, df_max: f64) -> ExactNadir {
    if p_loss <= 0.0 {
        return ExactNadir { feasible: true, depth: 0.0, margin: df_max, diagnostic: None };
    }
    let hr2 = 2.0 * h * r;
    if !(hr2 > 0.0) {
        return ExactNadir {
            feasible: false,
            depth: f64::INFINITY,
            margin: f64::NEG_INFINITY,
            diagnostic: Some(format!("logarithm argument is not positive: 2HR = {hr2} with loss {p_loss} MW")),
        };
    }
    let x = t_d * p_loss * c / hr2;
    let depth = t_d * p_loss * p_loss * psi(x) / hr2;
    let margin = df_max - depth;
    ExactNadir { feasible: margin >= 0.0, depth, margin, diagnostic: None }
}

pub fn exact_nadir_feasible(h: f64, r: f64, p_loss: f64, c: f64, t_d: f64, df_max: f64) -> bool {
    exact_nadir(h, r, p_loss, c, t_d, df_max).feasible
}

/// Linear nadir requirement on H·R with the damping term, floored at zero.
pub fn linear_requirement(p_loss: f64, c: f64, t_d: f64, df_max: f64) -> f64 {
    (p_loss * p_loss * t_d / (4.0 * df_max) - c * t_d / 4.0 * p_loss).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegionPoint {
    pub damping_product: f64,
    /// Smallest H·R meeting the exact condition, MW²·s.
    pub exact_hr: f64,
    /// H·R required by the linear approximation, MW²·s.
    pub linear_hr: f64,
}

/// Boundary of the exact nadir region in (D·P^D, H·R) for one loss size,
/// next to its linear inner approximation.
pub fn region_curve(p_loss: f64, t_d: f64, df_max: f64, damping_products: &[f64]) -> Vec<RegionPoint> {
    damping_products
        .iter()
        .map(|&c| RegionPoint {
            damping_product: c,
            exact_hr: min_exact_hr(p_loss, c, t_d, df_max),
            linear_hr: linear_requirement(p_loss, c, t_d, df_max),
        })
        .collect()
}

/// Bisection on H·R; the nadir depth is decreasing in H·R.
fn min_exact_hr(p_loss: f64, c: f64, t_d: f64, df_max: f64) -> f64 {
    if p_loss <= 0.0 || p_loss <= c * df_max {
        // Even vanishing H·R leaves the depth at P/c ≤ Δf_max.
        return 0.0;
    }
    let depth = |y: f64| {
        let x = t_d * p_loss * c / (2.0 * y);
        t_d * p_loss * p_loss * psi(x) / (2.0 * y)
    };
    let mut hi = p_loss * p_loss * t_d / (4.0 * df_max);
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if depth(mid) <= df_max {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-13 * hi {
            break;
        }
    }
    hi
}

/// `n` damping products D·P^D for demand evenly spaced over `[lo, hi]` MW.
pub fn damping_grid(damping: f64, demand_lo: f64, demand_hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![damping * demand_lo],
        _ => (0..n).map(|i| damping * (demand_lo + (demand_hi - demand_lo) * i as f64 / (n - 1) as f64)).collect(),
    }
}

fn csv_string(header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("write to memory");
    for r in rows {
        w.write_record(&r).expect("write to memory");
    }
    String::from_utf8(w.into_inner().expect("flush to memory")).expect("ascii output")
}

/// `time_s,deviation_hz` samples.
pub fn trace_csv(trace: &SwingTrace) -> String {
    csv_string(
        &["time_s", "deviation_hz"],
        trace.times.iter().zip(&trace.deviations).map(|(t, f)| vec![t.to_string(), f.to_string()]),
    )
}

/// One block of rows per loss size.
pub fn region_csv(curves: &[(f64, Vec<RegionPoint>)]) -> String {
    csv_string(
        &["loss_mw", "damping_mw_per_hz", "exact_hr_mw2s", "linear_hr_mw2s"],
        curves.iter().flat_map(|(p, pts)| {
            pts.iter().map(move |q| {
                vec![p.to_string(), q.damping_product.to_string(), q.exact_hr.to_string(), q.linear_hr.to_string()]
            })
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn boundary() -> SwingInputs {
        SwingInputs::new(5062.5, 0.0, 2000.0, 10.0, 1800.0)
    }

    fn freq() -> FrequencyParams {
        FrequencyParams {
            f0: 50.0,
            df_max: 0.8,
            df_ss_max: 0.5,
            rocof_max: 0.5,
            t_d: 10.0,
            damping: 0.0,
            deadband: 0.0,
            nadir_segments: vec![1800.0],
            largest_unit_rating: 1800.0,
            largest_unit_inertia: 5.0,
        }
    }

    #[test]
    fn boundary_nadir() {
        let tr = simulate_swing(&boundary()).unwrap();
        assert!((tr.nadir + 0.8).abs() < 1e-12, "{}", tr.nadir);
        assert!((tr.nadir_time - 9.0).abs() < 1e-12);
        assert!((tr.initial_rocof + 1800.0 / 10125.0).abs() < 1e-15);
        assert!((tr.initial_rocof + 0.17778).abs() < 1e-5);
        assert_eq!(tr.deviations[0], 0.0);
        let rep = check_security(&tr, &freq());
        assert!(rep.nadir.ok && rep.nadir.margin.abs() < 1e-9);
    }

    #[test]
    fn damping_raises_nadir() {
        let mut s = boundary();
        s.damping_product = 200.0;
        let tr = simulate_swing(&s).unwrap();
        assert!(tr.nadir > -0.8);
    }

    #[test]
    fn low_inertia_fails_rocof() {
        // Minimum inertia is P/(2·RoCoF) = 1800 MW·s².
        let s = SwingInputs::new(1700.0, 0.0, 5000.0, 10.0, 1800.0);
        let rep = check_security(&simulate_swing(&s).unwrap(), &freq());
        assert!(!rep.rocof.ok);
    }

    #[test]
    fn low_pfr_without_damping_fails_qss() {
        let s = SwingInputs::new(3000.0, 0.0, 1700.0, 10.0, 1800.0);
        let tr = simulate_swing(&s).unwrap();
        assert!(tr.diverged);
        assert!(!check_security(&tr, &freq()).qss.ok);
    }

    #[test]
    fn zero_loss_is_flat_start() {
        let tr = simulate_swing(&SwingInputs::new(100.0, 10.0, 0.0, 10.0, 0.0)).unwrap();
        assert_eq!(tr.nadir, 0.0);
        assert!(tr.deviations.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn trace_samples_cover_horizon() {
        let tr = simulate_swing(&boundary()).unwrap();
        assert_eq!(tr.times.len(), 6001);
        assert_eq!(*tr.times.last().unwrap(), 60.0);
        assert!(tr.deviations.iter().all(|&v| v >= tr.nadir - 1e-12));
    }

    #[test]
    fn invalid_inputs() {
        assert_eq!(SwingInputs::new(0.0, 0.0, 1.0, 1.0, 1.0).validate(), Err(SwingInputError::Inertia(0.0)));
        assert!(SwingInputs::new(1.0, -1.0, 1.0, 1.0, 1.0).validate().is_err());
    }

    #[test]
    fn series_branches_agree() {
        for u in [0.49_f64, 0.5, 0.51] {
            let direct = (u + (-u).exp_m1()) / (u * u);
            assert!((phi2(u) - direct).abs() < 1e-14);
        }
        for x in [0.0099_f64, 0.01, 0.0101] {
            let direct = (x - x.ln_1p()) / (x * x);
            assert!((psi(x) - direct).abs() < 1e-10);
        }
    }

    #[test]
    fn exact_nadir_cases() {
        let e = exact_nadir(5062.5, 2000.0, 1800.0, 0.0, 10.0, 0.8);
        assert!(e.margin.abs() < 1e-12 && e.feasible);
        assert!(exact_nadir_feasible(5062.5, 2000.0, 1800.0, 1.0, 10.0, 0.8));
        let z = exact_nadir(0.0, 2000.0, 1800.0, 100.0, 10.0, 0.8);
        assert!(!z.feasible && z.diagnostic.is_some());
    }

    #[test]
    fn exact_nadir_matches_simulation() {
        let s = SwingInputs::new(4000.0, 300.0, 2200.0, 10.0, 1800.0);
        let e = exact_nadir(s.inertia, s.pfr, s.loss, s.damping_product, 10.0, 0.8);
        let tr = simulate_swing(&s).unwrap();
        assert!(tr.nadir_time < 10.0);
        assert!((tr.nadir + e.depth).abs() < 1e-12, "{} vs {}", tr.nadir, e.depth);
    }

    #[test]
    fn region_endpoints() {
        let pts = region_curve(1800.0, 10.0, 0.8, &[0.0, 100.0, 1000.0, 2250.0, 3000.0]);
        assert!((pts[0].exact_hr - 10_125_000.0).abs() < 1e-3);
        assert_eq!(pts[0].linear_hr, 10_125_000.0);
        assert_eq!(pts[3].exact_hr, 0.0);
        assert_eq!(pts[3].linear_hr, 0.0);
        for w in pts.windows(2) {
            assert!(w[1].exact_hr <= w[0].exact_hr);
        }
        for p in &pts {
            assert!(p.linear_hr >= p.exact_hr);
        }
        let csv = region_csv(&[(1800.0, pts)]);
        assert!(csv.starts_with("loss_mw,damping_mw_per_hz"));
        assert_eq!(csv.lines().count(), 6);
    }
}

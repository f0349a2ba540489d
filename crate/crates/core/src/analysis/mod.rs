//! Closed-form security and usability numbers, and Monte Carlo harnesses
//! that check them against the protocol and adversary code.
//!
//! Probabilities are computed as exact rationals; call [`to_f64`] at the
//! presentation boundary.

mod reference;
mod report;
mod simulation;
mod stats;
mod usability;

pub use reference::{ReferenceRow, SECURITY_REFERENCE, USABILITY_REFERENCE};
pub use report::{AnalysisReport, ReportLine};
pub use simulation::{monte_carlo, SimulationConfig, SimulationReport, Strategy, TrialOutcome};
pub use stats::{chi_square_uniform, wilson_interval, ChiSquare};
pub use usability::{usability_metrics, UsabilityConstants, UsabilityMetrics};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AnalysisError {
    #[error("domain error: {0}")]
    Domain(String),
}

pub type Result<T, E = AnalysisError> = std::result::Result<T, E>;

fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(AnalysisError::Domain(msg.into()))
}

fn ratio(num: i64, den: i64) -> BigRational {
    BigRational::new(BigInt::from(num), BigInt::from(den))
}

fn pow_inv(base: u64, exp: u32) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(base).pow(exp))
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// System parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchemeParams {
    /// Grid alphabet size.
    pub n: u32,
    pub init_x: u32,
    pub sf: u32,
    pub rounds: u32,
    pub p2_len: u32,
    pub key_count: u32,
    /// Printable keyboard characters available to the first password.
    pub p1_alphabet: u32,
    pub p1_len: u32,
}

impl Default for SchemeParams {
    fn default() -> Self {
        SchemeParams {
            n: 64,
            init_x: 16,
            sf: 4,
            rounds: 6,
            p2_len: 4,
            key_count: 4,
            p1_alphabet: 95,
            p1_len: 6,
        }
    }
}

impl SchemeParams {
    /// Number of splits `d` with `sf^d == init_x`.
    pub fn depth(&self) -> Result<u32> {
        exact_log(self.init_x, self.sf)
    }

    pub fn validate(&self) -> Result<()> {
        self.depth()?;
        if self.n == 0 || self.key_count == 0 || self.init_x > self.n {
            return domain("n, key_count must be positive and init_x <= n");
        }
        Ok(())
    }
}

fn exact_log(x: u32, base: u32) -> Result<u32> {
    if base < 2 || x < base {
        return domain(format!("need x >= base > 1, got x={x}, base={base}"));
    }
    let mut d = 0;
    let mut v = 1u64;
    while v < x as u64 {
        v *= base as u64;
        d += 1;
    }
    if v == x as u64 {
        Ok(d)
    } else {
        domain(format!("{x} is not a power of {base}"))
    }
}

/// `∏_{k=1}^{m-1} ((n-k) - (m-1)) / (n-k)`. Zero once a numerator reaches 0.
pub fn p_disclosure_exact(m: u32, n: u32) -> Result<BigRational> {
    if m < 2 || m > n {
        return domain(format!("need 2 <= m <= n, got m={m}, n={n}"));
    }
    let (m, n) = (m as i64, n as i64);
    let mut acc = BigRational::one();
    for k in 1..m {
        let num = (n - k) - (m - 1);
        if num <= 0 {
            return Ok(BigRational::zero());
        }
        acc *= ratio(num, n - k);
    }
    Ok(acc)
}

pub fn p_disclosure(m: u32, n: u32) -> Result<f64> {
    p_disclosure_exact(m, n).map(|r| to_f64(&r))
}

/// `[1 - ∏_{k=1}^{upper} (n-1-k)/(n-k)] / key_count`, with `upper = init_x - 1`.
pub fn msv_second_session_prob_with_upper(params: &SchemeParams, upper: u32) -> BigRational {
    let n = params.n as i64;
    let product = (1..=upper as i64).fold(BigRational::one(), |acc, k| {
        if n - k <= 0 {
            acc
        } else {
            acc * ratio((n - 1 - k).max(0), n - k)
        }
    });
    (BigRational::one() - product) * ratio(1, params.key_count as i64)
}

pub fn msv_second_session_prob_exact(params: &SchemeParams) -> BigRational {
    msv_second_session_prob_with_upper(params, params.init_x.saturating_sub(1))
}

pub fn msv_second_session_prob(params: &SchemeParams) -> f64 {
    to_f64(&msv_second_session_prob_exact(params))
}

/// `P(|Q1 ∩ Q2| >= 2)` for two independently drawn subgroups of size
/// `init_x / sf` that both contain the secret: `1 - C(n-s, s-1) / C(n-1, s-1)`.
pub fn msv_second_session_combinatorial(params: &SchemeParams) -> Result<BigRational> {
    params.validate()?;
    let s = (params.init_x / params.sf) as u64;
    let n = params.n as u64;
    let miss = BigRational::new(binomial(n - s, s - 1), binomial(n - 1, s - 1));
    Ok(BigRational::one() - miss)
}

/// `P(|G1 ∩ G2| == 1)` for two independent first-use groups of size `m`
/// containing the secret: `C(n-m, m-1) / C(n-1, m-1)`. Telescopes to
/// [`p_disclosure_exact`].
pub fn first_session_unique_overlap(m: u32, n: u32) -> Result<BigRational> {
    if m < 1 || m > n {
        return domain(format!("need 1 <= m <= n, got m={m}, n={n}"));
    }
    let (m, n) = (m as u64, n as u64);
    if n - m < m - 1 {
        return Ok(BigRational::zero());
    }
    Ok(BigRational::new(binomial(n - m, m - 1), binomial(n - 1, m - 1)))
}

pub fn binomial(n: u64, k: u64) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let k = k.min(n - k);
    (0..k).fold(BigInt::one(), |acc, i| acc * BigInt::from(n - i) / BigInt::from(i + 1))
}

/// `1 + ⌈log_sf(init_x)⌉`.
pub fn session_resiliency(init_x: u32, sf: u32) -> Result<u32> {
    if sf < 2 || init_x < sf {
        return domain(format!("need init_x >= sf > 1, got init_x={init_x}, sf={sf}"));
    }
    let mut d = 0;
    let mut v = 1u64;
    while v < init_x as u64 {
        v *= sf as u64;
        d += 1;
    }
    Ok(1 + d)
}

pub fn total_resiliency(params: &SchemeParams) -> Result<u32> {
    Ok(session_resiliency(params.init_x, params.sf)? * params.p2_len)
}

/// `(sf - 1) / sf`.
pub fn detection_probability(sf: u32) -> Result<BigRational> {
    if sf < 2 {
        return domain(format!("need sf > 1, got {sf}"));
    }
    Ok(ratio(sf as i64 - 1, sf as i64))
}

/// `(k - 1) / k`.
pub fn honeyword_detection_prob(k: u32) -> Result<BigRational> {
    if k < 1 {
        return domain("need k >= 1");
    }
    Ok(ratio(k as i64 - 1, k as i64))
}

pub fn guess_success_probability(group_size: u32, n: u32) -> Result<BigRational> {
    if group_size < 1 || group_size > n {
        return domain(format!("need 1 <= group_size <= n, got {group_size}, {n}"));
    }
    Ok(ratio(group_size as i64, n as i64))
}

/// `p1_alphabet^-p1_len`.
pub fn p1_guess_probability(params: &SchemeParams) -> BigRational {
    pow_inv(params.p1_alphabet as u64, params.p1_len)
}

/// First-password guess times guessing the group of the given size.
pub fn combined_guess(params: &SchemeParams, group_size: u32) -> Result<BigRational> {
    Ok(p1_guess_probability(params) * guess_success_probability(group_size, params.n)?)
}

/// `p1_alphabet^-p1_len * key_count^-rounds`.
pub fn rks_probability(params: &SchemeParams) -> BigRational {
    p1_guess_probability(params) * pow_inv(params.key_count as u64, params.rounds)
}

/// `p1_alphabet^p1_len * n^p2_len`.
pub fn password_space(params: &SchemeParams) -> BigInt {
    BigInt::from(params.p1_alphabet).pow(params.p1_len) * BigInt::from(params.n).pow(params.p2_len)
}

/// One row of the `(init_x, sf)` sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub init_x: u32,
    pub sf: u32,
    pub depth: u32,
    pub session_resiliency: u32,
    pub total_resiliency: u32,
    pub detection_probability: f64,
}

/// Every `(init_x, sf)` pair with `sf^d == init_x`, `init_x <= n / key_count`.
pub fn parameter_sweep(params: &SchemeParams) -> Vec<SweepRow> {
    let max_x = params.n / params.key_count;
    let mut rows = Vec::new();
    for sf in 2..=max_x {
        let mut x = sf;
        while x <= max_x {
            let depth = exact_log(x, sf).expect("x is a power of sf");
            let sr = session_resiliency(x, sf).expect("x >= sf > 1");
            rows.push(SweepRow {
                init_x: x,
                sf,
                depth,
                session_resiliency: sr,
                total_resiliency: sr * params.p2_len,
                detection_probability: to_f64(&detection_probability(sf).expect("sf > 1")),
            });
            x *= sf;
        }
    }
    rows.sort_by_key(|r| (r.init_x, r.sf));
    rows
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn p_disclosure_matches_the_product_oracle() {
        let num: f64 = (34..=48).map(|x| x as f64).product();
        let den: f64 = (49..=63).map(|x| x as f64).product();
        let got = p_disclosure(16, 64).unwrap();
        assert!(close(got, num / den, 1e-15), "{got}");
        assert_eq!(format!("{got:.3}"), "0.009");
        assert_eq!(p_disclosure_exact(2, 64).unwrap(), ratio(62, 63));
        assert!(p_disclosure(1, 64).is_err());
        assert!(p_disclosure(65, 64).is_err());
        assert_eq!(p_disclosure(64, 64).unwrap(), 0.0);
    }

    #[test]
    fn p_disclosure_is_the_unique_overlap_probability() {
        for m in 2..=64 {
            assert_eq!(p_disclosure_exact(m, 64).unwrap(), first_session_unique_overlap(m, 64).unwrap());
        }
    }

    #[test]
    fn msv_second_session() {
        let p = SchemeParams::default();
        let exact = msv_second_session_prob_exact(&p);
        assert_eq!(exact, (BigRational::one() - ratio(48, 63)) * ratio(1, 4));
        assert!(close(to_f64(&exact), 0.0595, 1e-4));
        assert_eq!(msv_second_session_prob_with_upper(&p, 0), BigRational::zero());
        let comb = msv_second_session_combinatorial(&p).unwrap();
        let oracle = 1.0 - (60.0 * 59.0 * 58.0) / (63.0 * 62.0 * 61.0);
        assert!(close(to_f64(&comb), oracle, 1e-15));
    }

    #[test]
    fn resiliency_and_detection() {
        assert_eq!(session_resiliency(16, 4).unwrap(), 3);
        assert_eq!(session_resiliency(16, 16).unwrap(), 2);
        assert_eq!(total_resiliency(&SchemeParams::default()).unwrap(), 12);
        assert_eq!(detection_probability(4).unwrap(), ratio(3, 4));
        assert_eq!(detection_probability(16).unwrap(), ratio(15, 16));
        assert!(session_resiliency(2, 4).is_err());
        assert!(detection_probability(1).is_err());
    }

    #[test]
    fn honeyword_agrees_with_detection_at_four() {
        assert_eq!(honeyword_detection_prob(5).unwrap(), ratio(4, 5));
        assert_eq!(honeyword_detection_prob(1).unwrap(), BigRational::zero());
        assert_eq!(honeyword_detection_prob(4).unwrap(), detection_probability(4).unwrap());
    }

    #[test]
    fn guessing() {
        assert_eq!(to_f64(&guess_success_probability(4, 64).unwrap()), 0.0625);
        assert_eq!(guess_success_probability(1, 64).unwrap(), ratio(1, 64));
        assert_eq!(to_f64(&guess_success_probability(16, 64).unwrap()), 0.25);
        let p = SchemeParams::default();
        let p1 = to_f64(&p1_guess_probability(&p));
        assert!(close(p1 / 1.36e-12, 1.0, 0.01));
        let min = to_f64(&combined_guess(&p, 1).unwrap());
        assert!(close(min / 0.021e-12, 1.0, 0.02), "{min}");
    }

    #[test]
    fn random_key_submission() {
        let p = SchemeParams::default();
        let v = to_f64(&rks_probability(&p));
        assert!(close(v / 3.32e-16, 1.0, 0.01), "{v}");
        assert_eq!(pow_inv(4, 6), ratio(1, 4096));
        let zero_rounds = SchemeParams { rounds: 0, ..p };
        assert_eq!(rks_probability(&zero_rounds), p1_guess_probability(&p));
    }

    #[test]
    fn password_space_magnitude() {
        let space = to_f64(&BigRational::from_integer(password_space(&SchemeParams::default())));
        assert!(close(space / 1.2e19, 1.0, 0.03), "{space}");
    }

    #[test]
    fn sweep_only_lists_exact_powers() {
        let rows = parameter_sweep(&SchemeParams::default());
        assert!(rows.iter().all(|r| r.sf.pow(r.depth) == r.init_x));
        let default = rows.iter().find(|r| r.init_x == 16 && r.sf == 4).unwrap();
        assert_eq!(default.total_resiliency, 12);
        assert!(rows.iter().any(|r| r.init_x == 16 && r.sf == 2 && r.session_resiliency == 5));
        assert!(SchemeParams { init_x: 12, ..SchemeParams::default() }.validate().is_err());
    }

    proptest! {
        #[test]
        fn exact_and_float_agree(m in 2u32..=64) {
            let exact = to_f64(&p_disclosure_exact(m, 64).unwrap());
            let float: f64 = (1..m)
                .map(|k| (((64 - k) as f64) - (m - 1) as f64).max(0.0) / (64 - k) as f64)
                .product();
            prop_assert!((exact - float).abs() <= 1e-12);
        }

        #[test]
        fn probabilities_in_unit_interval(m in 2u32..=64, g in 1u32..=64) {
            let p = p_disclosure(m, 64).unwrap();
            prop_assert!((0.0..=1.0).contains(&p));
            let q = to_f64(&guess_success_probability(g, 64).unwrap());
            prop_assert!(q > 0.0 && q <= 1.0);
        }
    }
}

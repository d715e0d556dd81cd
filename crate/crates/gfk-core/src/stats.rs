//! Adapted McNemar test and one-way ANOVA with p-values.
//!
//! Tail probabilities come from in-repo continued-fraction incomplete
//! beta/gamma implementations (no external stats dependency); target
//! accuracy is 1e-10 absolute.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Critical value of the standard normal at p = 0.05 two-sided
/// (used for normal-approximation confidence intervals).
pub const Z_975: f64 = 1.959_963_984_540_054;

/// Paired detection outcomes for two annotators over a shared truth set.
///
/// `n01` counts nodules detected by A and missed by B, `n10` the reverse.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContingencyCounts {
    pub n00: usize,
    pub n01: usize,
    pub n10: usize,
    pub n11: usize,
}

impl ContingencyCounts {
    /// Tally per-truth detection flags for annotators A and B.
    ///
    /// Both slices must cover the same truths in the same order.
    pub fn from_paired(detected_a: &[bool], detected_b: &[bool]) -> Result<Self> {
        if detected_a.len() != detected_b.len() {
            return Err(Error::Parameter(format!(
                "paired outcome lengths differ: {} vs {}",
                detected_a.len(),
                detected_b.len()
            )));
        }
        let mut c = ContingencyCounts { n00: 0, n01: 0, n10: 0, n11: 0 };
        for (&a, &b) in detected_a.iter().zip(detected_b) {
            match (a, b) {
                (false, false) => c.n00 += 1,
                (true, false) => c.n01 += 1,
                (false, true) => c.n10 += 1,
                (true, true) => c.n11 += 1,
            }
        }
        Ok(c)
    }

    pub fn total(&self) -> usize {
        self.n00 + self.n01 + self.n10 + self.n11
    }
}

#[derive(Debug, Clone, Copy)]
pub struct McNemarResult {
    pub chi2: f64,
    pub p: f64,
}

/// Continuity-corrected McNemar statistic over discordant pairs,
/// chi2 = (|n01 - n10| - 1)^2 / (n01 + n10), with 1 degree of freedom.
///
/// The correction is applied unconditionally, also when |n01 - n10| <= 1.
pub fn mcnemar(c: &ContingencyCounts) -> Result<McNemarResult> {
    let discordant = c.n01 + c.n10;
    if discordant == 0 {
        return Err(Error::DegenerateTest(
            "McNemar requires at least one discordant pair (n01 + n10 > 0)".into(),
        ));
    }
    let diff = (c.n01 as f64 - c.n10 as f64).abs();
    let chi2 = (diff - 1.0).powi(2) / discordant as f64;
    let p = chi_squared_sf(chi2, 1.0);
    Ok(McNemarResult { chi2, p })
}

/// Observation groups for a one-way ANOVA (k groups, N observations).
#[derive(Debug, Clone)]
pub struct AnovaInput {
    groups: Vec<Vec<f64>>,
}

impl AnovaInput {
    pub fn new(groups: Vec<Vec<f64>>) -> Result<Self> {
        if groups.len() < 2 {
            return Err(Error::Parameter("ANOVA requires at least 2 groups".into()));
        }
        if groups.iter().any(|g| g.is_empty()) {
            return Err(Error::Parameter("ANOVA groups must be nonempty".into()));
        }
        let n: usize = groups.iter().map(|g| g.len()).sum();
        let k = groups.len();
        if n - k < 1 {
            return Err(Error::Parameter(
                "ANOVA requires N - k >= 1 residual degrees of freedom".into(),
            ));
        }
        Ok(AnovaInput { groups })
    }

    pub fn groups(&self) -> &[Vec<f64>] {
        &self.groups
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AnovaResult {
    pub f: f64,
    /// (k - 1, N - k)
    pub dof: (usize, usize),
    pub p: f64,
    pub ssr: f64,
    pub sse: f64,
}

impl AnovaResult {
    /// True when SSE was zero with nonzero SSR (between-group variation only);
    /// `f` is +inf and `p` is reported as 0.
    pub fn infinite_f(&self) -> bool {
        self.f.is_infinite()
    }
}

/// One-way ANOVA: F = (SSR / (k-1)) / (SSE / (N-k)) against the
/// F(k-1, N-k) upper tail.
pub fn anova(input: &AnovaInput) -> Result<AnovaResult> {
    let groups = input.groups();
    let k = groups.len();
    let n: usize = groups.iter().map(|g| g.len()).sum();
    let grand_mean = groups.iter().flatten().sum::<f64>() / n as f64;

    let mut ssr = 0.0;
    let mut sse = 0.0;
    for g in groups {
        let mean = g.iter().sum::<f64>() / g.len() as f64;
        ssr += g.len() as f64 * (mean - grand_mean).powi(2);
        sse += g.iter().map(|x| (x - mean).powi(2)).sum::<f64>();
    }

    let dof = (k - 1, n - k);
    if sse == 0.0 {
        if ssr == 0.0 {
            return Err(Error::DegenerateTest(
                "ANOVA with zero within-group and between-group variation".into(),
            ));
        }
        return Ok(AnovaResult { f: f64::INFINITY, dof, p: 0.0, ssr, sse });
    }

    let f = (ssr / dof.0 as f64) / (sse / dof.1 as f64);
    let p = f_sf(f, dof.0 as f64, dof.1 as f64);
    Ok(AnovaResult { f, dof, p, ssr, sse })
}

/// Conventional significance call: reject equality when p < 0.05 (strict).
pub fn significance(p: f64) -> bool {
    p < 0.05
}

/// JSON-serializable record of a single test run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StatReport {
    pub test: String,
    pub statistic: f64,
    pub dof: Vec<f64>,
    pub p: f64,
    pub significant: bool,
}

impl StatReport {
    pub fn from_mcnemar(r: &McNemarResult) -> Self {
        StatReport {
            test: "mcnemar".into(),
            statistic: r.chi2,
            dof: vec![1.0],
            p: r.p,
            significant: significance(r.p),
        }
    }

    pub fn from_anova(r: &AnovaResult) -> Self {
        StatReport {
            test: "anova".into(),
            statistic: r.f,
            dof: vec![r.dof.0 as f64, r.dof.1 as f64],
            p: r.p,
            significant: significance(r.p),
        }
    }
}

// ---------------------------------------------------------------------------
// Tail functions
// ---------------------------------------------------------------------------

/// Chi-squared survival P(X > x) with `k` degrees of freedom,
/// equal to the regularized upper incomplete gamma Q(k/2, x/2).
pub fn chi_squared_sf(x: f64, k: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    special::reg_gamma_upper(k / 2.0, x / 2.0)
}

/// F-distribution survival P(F > x) with (d1, d2) degrees of freedom.
///
/// Computed directly as I_{d2/(d2 + d1 x)}(d2/2, d1/2) so that small tails
/// do not go through a 1 - cdf cancellation.
pub fn f_sf(x: f64, d1: f64, d2: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    special::reg_beta(d2 / (d2 + d1 * x), d2 / 2.0, d1 / 2.0)
}

/// Student-t CDF P(T <= t) with `df` degrees of freedom.
pub fn student_t_cdf(t: f64, df: f64) -> f64 {
    let tail = 0.5 * special::reg_beta(df / (df + t * t), df / 2.0, 0.5);
    if t >= 0.0 {
        1.0 - tail
    } else {
        tail
    }
}

/// Student-t quantile (inverse CDF) by bisection on [`student_t_cdf`].
pub fn student_t_quantile(p: f64, df: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile probability must be in (0, 1)");
    if (p - 0.5).abs() < 1e-15 {
        return 0.0;
    }
    let (mut lo, mut hi) = if p > 0.5 { (0.0, 1e3) } else { (-1e3, 0.0) };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if student_t_cdf(mid, df) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// Special functions backing the tail probabilities.
pub mod special {
    /// ln Gamma(z) for z > 0 via the Lanczos approximation (g = 7, n = 9).
    pub fn ln_gamma(z: f64) -> f64 {
        const COEF: [f64; 9] = [
            0.999_999_999_999_809_93,
            676.520_368_121_885_1,
            -1_259.139_216_722_402_8,
            771.323_428_777_653_13,
            -176.615_029_162_140_59,
            12.507_343_278_686_905,
            -0.138_571_095_265_720_12,
            9.984_369_578_019_571_6e-6,
            1.505_632_735_149_311_6e-7,
        ];
        if z < 0.5 {
            // Reflection: Gamma(z) Gamma(1-z) = pi / sin(pi z)
            let s = (std::f64::consts::PI * z).sin();
            return std::f64::consts::PI.ln() - s.abs().ln() - ln_gamma(1.0 - z);
        }
        let z = z - 1.0;
        let mut acc = COEF[0];
        for (i, &c) in COEF.iter().enumerate().skip(1) {
            acc += c / (z + i as f64);
        }
        let t = z + 7.5;
        0.5 * (2.0 * std::f64::consts::PI).ln() + (z + 0.5) * t.ln() - t + acc.ln()
    }

    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;
    const MAX_ITER: usize = 500;

    /// Regularized lower incomplete gamma P(a, x).
    pub fn reg_gamma_lower(a: f64, x: f64) -> f64 {
        assert!(a > 0.0 && x >= 0.0);
        if x == 0.0 {
            return 0.0;
        }
        if x < a + 1.0 {
            gamma_series(a, x)
        } else {
            1.0 - gamma_cf(a, x)
        }
    }

    /// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
    pub fn reg_gamma_upper(a: f64, x: f64) -> f64 {
        assert!(a > 0.0 && x >= 0.0);
        if x == 0.0 {
            return 1.0;
        }
        if x < a + 1.0 {
            1.0 - gamma_series(a, x)
        } else {
            gamma_cf(a, x)
        }
    }

    fn gamma_series(a: f64, x: f64) -> f64 {
        let mut term = 1.0 / a;
        let mut sum = term;
        let mut ap = a;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            term *= x / ap;
            sum += term;
            if term.abs() < sum.abs() * EPS {
                break;
            }
        }
        sum * (a * x.ln() - x - ln_gamma(a)).exp()
    }

    /// Upper-tail continued fraction for Q(a, x), modified Lentz.
    fn gamma_cf(a: f64, x: f64) -> f64 {
        let mut b = x + 1.0 - a;
        let mut c = 1.0 / TINY;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..=MAX_ITER {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < TINY {
                d = TINY;
            }
            c = b + an / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        (a * x.ln() - x - ln_gamma(a)).exp() * h
    }

    /// Regularized incomplete beta I_x(a, b) via the Lentz continued fraction.
    pub fn reg_beta(x: f64, a: f64, b: f64) -> f64 {
        assert!(a > 0.0 && b > 0.0);
        if x <= 0.0 {
            return 0.0;
        }
        if x >= 1.0 {
            return 1.0;
        }
        let front =
            (ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln()).exp();
        // The CF converges fastest for x < (a+1)/(a+b+2); use symmetry otherwise.
        if x < (a + 1.0) / (a + b + 2.0) {
            front * beta_cf(x, a, b) / a
        } else {
            1.0 - front * beta_cf(1.0 - x, b, a) / b
        }
    }

    fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
        let qab = a + b;
        let qap = a + 1.0;
        let qam = a - 1.0;
        let mut c = 1.0;
        let mut d = 1.0 - qab * x / qap;
        if d.abs() < TINY {
            d = TINY;
        }
        d = 1.0 / d;
        let mut h = d;
        for m in 1..=MAX_ITER {
            let m = m as f64;
            let m2 = 2.0 * m;
            let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
            d = 1.0 + aa * d;
            if d.abs() < TINY {
                d = TINY;
            }
            c = 1.0 + aa / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            h *= d * c;
            let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
            d = 1.0 + aa * d;
            if d.abs() < TINY {
                d = TINY;
            }
            c = 1.0 + aa / c;
            if c.abs() < TINY {
                c = TINY;
            }
            d = 1.0 / d;
            let del = d * c;
            h *= del;
            if (del - 1.0).abs() < EPS {
                break;
            }
        }
        h
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    // -- quadrature oracle -------------------------------------------------
    // Independent of the incomplete-gamma/beta path above: plain adaptive
    // Simpson on the density kernels, normalized by their own integrals.

    fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }

    fn adaptive<F: Fn(f64) -> f64 + Copy>(
        f: F,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: usize,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simpson(a, m, fa, flm, fm);
        let right = simpson(m, b, fm, frm, fb);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        adaptive(f, a, m, fa, flm, fm, left, tol / 2.0, depth - 1)
            + adaptive(f, m, b, fm, frm, fb, right, tol / 2.0, depth - 1)
    }

    fn integrate<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, tol: f64) -> f64 {
        let m = 0.5 * (a + b);
        let (fa, fm, fb) = (f(a), f(m), f(b));
        adaptive(f, a, b, fa, fm, fb, simpson(a, b, fa, fm, fb), tol, 40)
    }

    /// erfc(z) by direct quadrature of the Gaussian.
    fn erfc_oracle(z: f64) -> f64 {
        2.0 / std::f64::consts::PI.sqrt() * integrate(|t| (-t * t).exp(), z, z + 12.0, 1e-14)
    }

    /// Chi-squared survival by quadrature of the density kernel
    /// x^(k/2-1) e^(-x/2), with x = u^2 substitution to absorb the k = 1
    /// singularity at the origin.
    fn chi2_sf_oracle(x: f64, k: f64) -> f64 {
        let kern = move |u: f64| 2.0 * u.powf(k - 1.0) * (-u * u / 2.0).exp();
        let hi = (x + 320.0).sqrt();
        let tail = integrate(kern, x.sqrt(), hi, 1e-14);
        let total = integrate(kern, 0.0, hi, 1e-14);
        tail / total
    }

    /// integral_0^t0 of t^(a-1) (1-t)^(b-1) dt. The t = u^2 (and 1-t = v^2)
    /// substitutions absorb the endpoint singularities for a, b >= 1/2.
    fn beta_integral_to(t0: f64, a: f64, b: f64) -> f64 {
        let low = move |u: f64| 2.0 * u.powf(2.0 * a - 1.0) * (1.0 - u * u).powf(b - 1.0);
        let high = move |v: f64| 2.0 * v.powf(2.0 * b - 1.0) * (1.0 - v * v).powf(a - 1.0);
        if t0 <= 0.5 {
            integrate(low, 0.0, t0.sqrt(), 1e-13)
        } else {
            integrate(low, 0.0, 0.5f64.sqrt(), 1e-13)
                + integrate(high, (1.0 - t0).sqrt(), 0.5f64.sqrt(), 1e-13)
        }
    }

    /// F survival by quadrature: the t = d2/(d2 + d1 x) substitution turns
    /// the upper tail into a finite beta integral, normalized by its own
    /// full integral (no gamma functions involved).
    fn f_sf_oracle(x: f64, d1: f64, d2: f64) -> f64 {
        let (a, b) = (d2 / 2.0, d1 / 2.0);
        let t0 = d2 / (d2 + d1 * x);
        beta_integral_to(t0, a, b) / beta_integral_to(1.0, a, b)
    }

    // -- mcnemar -----------------------------------------------------------

    #[test]
    fn mcnemar_direct_substitution() {
        let c = ContingencyCounts { n00: 5, n01: 10, n10: 2, n11: 25 };
        let r = mcnemar(&c).unwrap();
        assert_eq!(r.chi2, 49.0 / 12.0);
        assert_abs_diff_eq!(r.p, 0.0433, epsilon = 1e-4);
        // exact value frozen from the erfc quadrature oracle
        assert_abs_diff_eq!(r.p, erfc_oracle((r.chi2 / 2.0).sqrt()), epsilon = 1e-10);
    }

    #[test]
    fn mcnemar_equal_discordants_keeps_correction() {
        let c = ContingencyCounts { n00: 0, n01: 3, n10: 3, n11: 0 };
        let r = mcnemar(&c).unwrap();
        assert_abs_diff_eq!(r.chi2, 1.0 / 6.0, epsilon = 1e-15);
    }

    #[test]
    fn mcnemar_no_discordant_pairs_is_degenerate() {
        let c = ContingencyCounts { n00: 4, n01: 0, n10: 0, n11: 9 };
        assert!(matches!(mcnemar(&c), Err(Error::DegenerateTest(_))));
    }

    #[test]
    fn mcnemar_symmetric_in_discordants() {
        for (a, b) in [(10usize, 2usize), (1, 7), (4, 4), (0, 3)] {
            let r1 = mcnemar(&ContingencyCounts { n00: 0, n01: a, n10: b, n11: 0 }).unwrap();
            let r2 = mcnemar(&ContingencyCounts { n00: 0, n01: b, n10: a, n11: 0 }).unwrap();
            assert_eq!(r1.chi2, r2.chi2);
            assert_eq!(r1.p, r2.p);
        }
    }

    #[test]
    fn contingency_from_paired() {
        let a = [true, true, false, false, true];
        let b = [true, false, true, false, false];
        let c = ContingencyCounts::from_paired(&a, &b).unwrap();
        assert_eq!(c, ContingencyCounts { n00: 1, n01: 2, n10: 1, n11: 1 });
        assert!(ContingencyCounts::from_paired(&a, &b[..3]).is_err());
    }

    // -- anova ---------------------------------------------------------------

    #[test]
    fn anova_identical_groups() {
        let input = AnovaInput::new(vec![vec![1.0, 2.0, 3.0], vec![1.0, 2.0, 3.0]]).unwrap();
        let r = anova(&input).unwrap();
        assert_eq!(r.f, 0.0);
        assert_abs_diff_eq!(r.p, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn anova_zero_within_variation_flags_infinite_f() {
        let input = AnovaInput::new(vec![vec![0.0, 0.0], vec![1.0, 1.0]]).unwrap();
        let r = anova(&input).unwrap();
        assert!(r.infinite_f());
        assert_eq!(r.p, 0.0);
    }

    #[test]
    fn anova_fully_degenerate() {
        let input = AnovaInput::new(vec![vec![2.0, 2.0], vec![2.0, 2.0]]).unwrap();
        assert!(matches!(anova(&input), Err(Error::DegenerateTest(_))));
    }

    #[test]
    fn anova_hand_computed_sums_of_squares() {
        // SSR = 4*(2.5-3.5)^2 + 4*(4.5-3.5)^2 = 8, SSE = 5 + 5 = 10,
        // F = (8/1)/(10/6) = 4.8 at dof (1, 6).
        let input =
            AnovaInput::new(vec![vec![1.0, 2.0, 3.0, 4.0], vec![3.0, 4.0, 5.0, 6.0]]).unwrap();
        let r = anova(&input).unwrap();
        assert_eq!(r.ssr, 8.0);
        assert_eq!(r.sse, 10.0);
        assert_eq!(r.f, 4.8);
        assert_eq!(r.dof, (1, 6));
        assert_abs_diff_eq!(r.p, f_sf_oracle(4.8, 1.0, 6.0), epsilon = 1e-8);
    }

    #[test]
    fn anova_f_four_exactly() {
        // SSR = 4 + 4 = 8, SSE = 6 + 6 = 12, F = (8/1)/(12/6) = 4.
        let input =
            AnovaInput::new(vec![vec![1.0, 3.0, 4.0, 4.0], vec![3.0, 5.0, 6.0, 6.0]]).unwrap();
        let r = anova(&input).unwrap();
        assert_eq!(r.f, 4.0);
        assert_eq!(r.dof, (1, 6));
        assert_abs_diff_eq!(r.p, 0.0924, epsilon = 1e-4);
        assert_abs_diff_eq!(r.p, f_sf_oracle(4.0, 1.0, 6.0), epsilon = 1e-8);
    }

    #[test]
    fn anova_invariant_under_shift_and_scale() {
        let base = vec![vec![1.0, 2.0, 3.0, 4.0], vec![3.0, 4.0, 5.0, 6.0]];
        let f0 = anova(&AnovaInput::new(base.clone()).unwrap()).unwrap().f;
        for (shift, scale) in [(10.0, 1.0), (0.0, 3.0), (-7.0, 0.25)] {
            let mapped: Vec<Vec<f64>> = base
                .iter()
                .map(|g| g.iter().map(|x| x * scale + shift).collect())
                .collect();
            let f1 = anova(&AnovaInput::new(mapped).unwrap()).unwrap().f;
            assert_abs_diff_eq!(f0, f1, epsilon = 1e-10);
        }
    }

    #[test]
    fn anova_input_validation() {
        assert!(AnovaInput::new(vec![vec![1.0]]).is_err());
        assert!(AnovaInput::new(vec![vec![1.0], vec![]]).is_err());
        assert!(AnovaInput::new(vec![vec![1.0], vec![2.0]]).is_err()); // N - k = 0
    }

    // -- tail functions vs oracles ------------------------------------------

    #[test]
    fn chi2_sf_matches_erfc_identity_at_one_dof() {
        for &x in &[0.01, 0.5, 1.0, 2.0, 4.0833333333333, 9.0, 15.0] {
            assert_abs_diff_eq!(chi_squared_sf(x, 1.0), erfc_oracle((x / 2.0).sqrt()), epsilon = 1e-10);
        }
    }

    #[test]
    fn chi2_sf_matches_quadrature_oracle() {
        for &k in &[1.0, 2.0, 3.0, 5.0, 8.0] {
            for &x in &[0.2, 1.0, 3.0, 7.5, 14.0] {
                assert_abs_diff_eq!(chi_squared_sf(x, k), chi2_sf_oracle(x, k), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn f_sf_matches_quadrature_oracle() {
        for &(d1, d2) in &[(1.0, 6.0), (2.0, 4.0), (3.0, 10.0), (5.0, 2.0), (7.0, 7.0)] {
            for &x in &[0.3, 1.0, 2.5, 4.8, 7.0] {
                assert_abs_diff_eq!(f_sf(x, d1, d2), f_sf_oracle(x, d1, d2), epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn t_quantile_round_trips_through_cdf() {
        for &df in &[1.0, 4.0, 10.0, 30.0] {
            for &p in &[0.025, 0.3, 0.5, 0.8, 0.975] {
                let t = student_t_quantile(p, df);
                assert_abs_diff_eq!(student_t_cdf(t, df), p, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn significance_is_strict_at_alpha() {
        assert!(significance(0.04));
        assert!(!significance(0.05));
        assert!(!significance(0.9));
    }
}

//! Paired and Welch t-tests, McNemar's test, Benjamini-Hochberg, and the
//! special functions behind their p-values.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    PairedT,
    WelchT,
    McnemarChi2,
    McnemarExact,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    #[serde(with = "crate::evaluate::float_scalar")]
    pub statistic: f64,
    pub df: Option<f64>,
    pub p_value: f64,
    pub n: usize,
    pub method: TestMethod,
    /// Set when the input admits no test (zero variance, no discordant pairs).
    pub degenerate: bool,
}

const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + 7.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

const EPS: f64 = 1e-15;
const TINY: f64 = 1e-300;
const MAX_ITER: usize = 1000;

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
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

/// Regularized incomplete beta `I_x(a, b)`.
pub fn inc_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Regularized upper incomplete gamma `Q(a, x)`.
pub fn inc_gamma_upper(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    let ln_front = -x + a * x.ln() - ln_gamma(a);
    if x < a + 1.0 {
        let mut sum = 1.0 / a;
        let mut del = sum;
        let mut ap = a;
        for _ in 0..MAX_ITER {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * EPS {
                break;
            }
        }
        1.0 - sum * ln_front.exp()
    } else {
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
        ln_front.exp() * h
    }
}

/// Two-sided Student t tail probability `P(|T| >= |t|)`.
pub fn t_two_sided_p(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    inc_beta(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

/// Chi-square upper tail `P(X >= x)`.
pub fn chi2_sf(x: f64, k: f64) -> f64 {
    inc_gamma_upper(k / 2.0, x / 2.0).clamp(0.0, 1.0)
}

/// Exact two-sided binomial test of `k` successes in `n` trials at p = 1/2.
pub fn binomial_two_sided_half(k: u64, n: u64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    let lo = k.min(n - k);
    let ln_half_n = n as f64 * 0.5f64.ln();
    let ln_n1 = ln_gamma(n as f64 + 1.0);
    let tail: f64 = (0..=lo)
        .map(|i| {
            (ln_n1 - ln_gamma(i as f64 + 1.0) - ln_gamma((n - i) as f64 + 1.0) + ln_half_n).exp()
        })
        .sum();
    (2.0 * tail).min(1.0)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_var(xs: &[f64], m: f64) -> f64 {
    xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

fn check_finite(xs: &[f64], what: &str) -> Result<()> {
    if xs.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::Numeric(format!("non-finite value in {what}")))
    }
}

/// Degenerate rule for zero-variance inputs: a zero mean difference gives
/// statistic 0 and p = 1, a nonzero one gives an infinite statistic and p = 0.
fn degenerate_t(mean_diff: f64, df: f64, n: usize, method: TestMethod) -> TestResult {
    let (statistic, p_value) = if mean_diff == 0.0 {
        (0.0, 1.0)
    } else {
        (mean_diff.signum() * f64::INFINITY, 0.0)
    };
    TestResult {
        statistic,
        df: Some(df),
        p_value,
        n,
        method,
        degenerate: true,
    }
}

/// Two-sided paired t-test on `xs - ys`.
pub fn paired_t(xs: &[f64], ys: &[f64]) -> Result<TestResult> {
    if xs.len() != ys.len() {
        return Err(Error::data(format!(
            "paired t-test needs equal lengths, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 2 {
        return Err(Error::data("paired t-test needs at least two pairs"));
    }
    check_finite(xs, "paired t-test input")?;
    check_finite(ys, "paired t-test input")?;
    let d: Vec<f64> = xs.iter().zip(ys).map(|(x, y)| x - y).collect();
    let n = d.len();
    let df = n as f64 - 1.0;
    let m = mean(&d);
    let var = sample_var(&d, m);
    if var == 0.0 {
        return Ok(degenerate_t(m, df, n, TestMethod::PairedT));
    }
    let t = m / (var / n as f64).sqrt();
    Ok(TestResult {
        statistic: t,
        df: Some(df),
        p_value: t_two_sided_p(t, df),
        n,
        method: TestMethod::PairedT,
        degenerate: false,
    })
}

/// Two-sided Welch t-test with Welch-Satterthwaite degrees of freedom.
pub fn welch_t(xs: &[f64], ys: &[f64]) -> Result<TestResult> {
    if xs.len() < 2 || ys.len() < 2 {
        return Err(Error::data("Welch t-test needs at least two values per group"));
    }
    check_finite(xs, "Welch t-test input")?;
    check_finite(ys, "Welch t-test input")?;
    let (n1, n2) = (xs.len() as f64, ys.len() as f64);
    let (m1, m2) = (mean(xs), mean(ys));
    let (v1, v2) = (sample_var(xs, m1) / n1, sample_var(ys, m2) / n2);
    let n = xs.len() + ys.len();
    let se2 = v1 + v2;
    if se2 == 0.0 {
        return Ok(degenerate_t(m1 - m2, n1 + n2 - 2.0, n, TestMethod::WelchT));
    }
    let t = (m1 - m2) / se2.sqrt();
    let df = se2 * se2 / (v1 * v1 / (n1 - 1.0) + v2 * v2 / (n2 - 1.0));
    Ok(TestResult {
        statistic: t,
        df: Some(df),
        p_value: t_two_sided_p(t, df),
        n,
        method: TestMethod::WelchT,
        degenerate: false,
    })
}

pub const MCNEMAR_EXACT_BELOW: u64 = 25;

fn mcnemar_statistic(b: u64, c: u64) -> f64 {
    let diff = (b as f64 - c as f64).abs() - 1.0;
    diff.powi(2) / (b + c) as f64
}

fn mcnemar_degenerate(method: TestMethod) -> TestResult {
    TestResult {
        statistic: 0.0,
        df: None,
        p_value: 1.0,
        n: 0,
        method,
        degenerate: true,
    }
}

/// McNemar's test on discordant counts: continuity-corrected chi-square when
/// `b + c >= 25`, otherwise the exact binomial test. The statistic field
/// always carries the corrected chi-square value.
pub fn mcnemar(b: u64, c: u64) -> TestResult {
    let n = b + c;
    if n == 0 {
        return mcnemar_degenerate(TestMethod::McnemarExact);
    }
    if n >= MCNEMAR_EXACT_BELOW {
        return mcnemar_chi2(b, c);
    }
    TestResult {
        statistic: mcnemar_statistic(b, c),
        df: None,
        p_value: binomial_two_sided_half(b, n),
        n: n as usize,
        method: TestMethod::McnemarExact,
        degenerate: false,
    }
}

/// Continuity-corrected chi-square McNemar test regardless of sample size.
pub fn mcnemar_chi2(b: u64, c: u64) -> TestResult {
    let n = b + c;
    if n == 0 {
        return mcnemar_degenerate(TestMethod::McnemarChi2);
    }
    let stat = mcnemar_statistic(b, c);
    TestResult {
        statistic: stat,
        df: None,
        p_value: chi2_sf(stat, 1.0),
        n: n as usize,
        method: TestMethod::McnemarChi2,
        degenerate: false,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BhResult {
    pub reject: Vec<bool>,
    pub adjusted: Vec<f64>,
}

/// Benjamini-Hochberg step-up procedure; outputs follow input order.
pub fn benjamini_hochberg(p_values: &[f64], alpha: f64) -> Result<BhResult> {
    if p_values.is_empty() {
        return Err(Error::data("Benjamini-Hochberg needs at least one p-value"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Config(vec![format!("alpha must be in (0, 1), got {alpha}")]));
    }
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::Numeric(format!("p-value {p} outside [0, 1]")));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let k = order
        .iter()
        .enumerate()
        .filter(|&(rank, &i)| p_values[i] <= (rank + 1) as f64 * alpha / m as f64)
        .map(|(rank, _)| rank + 1)
        .max()
        .unwrap_or(0);
    let mut reject = vec![false; m];
    for &i in &order[..k] {
        reject[i] = true;
    }
    let mut adjusted = vec![0.0; m];
    let mut running = 1.0f64;
    for (rank, &i) in order.iter().enumerate().rev() {
        running = running.min(m as f64 * p_values[i] / (rank + 1) as f64);
        adjusted[i] = running.min(1.0);
    }
    Ok(BhResult { reject, adjusted })
}

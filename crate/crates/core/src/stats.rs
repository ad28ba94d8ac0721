//! Rank correlation, significance and error metrics.

use std::io::Write;

use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationResult {
    pub srcc: f64,
    pub p_value: f64,
    /// `log10(p_value)`, finite even where `p_value` underflows to zero.
    pub log10_p: f64,
    pub n: usize,
}

/// Fractional ranks (1-based), ties sharing the mean of their positions.
pub fn average_ranks(x: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && x[order[end]] == x[order[start]] {
            end += 1;
        }
        // positions start..end (0-based) share rank mean(start+1 ..= end)
        let rank = (start + end + 1) as f64 / 2.0;
        for &i in &order[start..end] {
            ranks[i] = rank;
        }
        start = end;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::InsufficientData("zero rank variance".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman rank correlation with average-rank tie handling.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    if x.len() < 3 {
        return Err(Error::InsufficientData(format!("spearman needs n >= 3, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| v.is_nan()) {
        return Err(Error::Domain("NaN in spearman input".into()));
    }
    pearson(&average_ranks(x), &average_ranks(y))
}

/// Natural log of the regularized incomplete beta `I_x(a, b)`.
///
/// `one_minus_x` is passed separately so callers that know it more precisely
/// than `1 - x` do not lose digits.
fn ln_beta_reg(a: f64, b: f64, x: f64, one_minus_x: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if one_minus_x <= 0.0 {
        return 0.0;
    }
    let ln_front = a * x.ln() + b * one_minus_x.ln() + ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b);
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front - a.ln() + beta_continued_fraction(a, b, x).ln()
    } else {
        let complement = (ln_front - b.ln()).exp() * beta_continued_fraction(b, a, one_minus_x);
        (-complement).ln_1p()
    }
}

// Modified Lentz evaluation of the incomplete-beta continued fraction.
fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
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
    for m in 1..=10_000 {
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

/// Two-sided `log10` p-value of a Spearman coefficient under the Student-t
/// approximation with `n - 2` degrees of freedom.
pub fn spearman_log10_pvalue(srcc: f64, n: usize) -> Result<f64> {
    if n < 3 {
        return Err(Error::InsufficientData(format!("p-value needs n >= 3, got {n}")));
    }
    if !(-1.0..=1.0).contains(&srcc) {
        return Err(Error::Domain(format!("correlation {srcc} outside [-1, 1]")));
    }
    let r = srcc.abs();
    if r == 1.0 {
        return Ok(f64::NEG_INFINITY);
    }
    // With t = r sqrt(df / (1 - r^2)) the two-sided tail is I_{df/(df+t^2)}(df/2, 1/2)
    // and df/(df+t^2) reduces to 1 - r^2.
    let df = (n - 2) as f64;
    let x = (1.0 - r) * (1.0 + r);
    let ln_p = ln_beta_reg(df / 2.0, 0.5, x, r * r);
    Ok((ln_p / std::f64::consts::LN_10).min(0.0))
}

/// Two-sided p-value; 0 for a perfect correlation.
pub fn spearman_pvalue(srcc: f64, n: usize) -> Result<f64> {
    Ok(10f64.powf(spearman_log10_pvalue(srcc, n)?))
}

pub fn spearman_test(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    let srcc = spearman(x, y)?;
    let log10_p = spearman_log10_pvalue(srcc, x.len())?;
    Ok(CorrelationResult { srcc, p_value: 10f64.powf(log10_p), log10_p, n: x.len() })
}

/// Renders a p-value from its log10 so values below `f64` range stay readable.
pub fn format_pvalue(log10_p: f64) -> String {
    if log10_p == f64::NEG_INFINITY {
        return "0".into();
    }
    if log10_p.is_nan() {
        return "NaN".into();
    }
    let p = 10f64.powf(log10_p);
    if p > 0.0 && p.is_normal() {
        return format!("{p:e}");
    }
    let exp = log10_p.floor();
    let mantissa = 10f64.powf(log10_p - exp);
    format!("{mantissa}e{exp}")
}

pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    if pred.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), got: pred.len() });
    }
    if pred.is_empty() {
        return Err(Error::InsufficientData("mae of empty vectors".into()));
    }
    Ok(pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum::<f64>() / pred.len() as f64)
}

/// Sample quantile with linear interpolation between order statistics.
pub fn quantile(values: &[f64], q: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::InsufficientData("quantile of empty slice".into()));
    }
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Domain(format!("quantile level {q} outside [0, 1]")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(quantile_sorted(&sorted, q))
}

pub(crate) fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (sorted[hi] - sorted[lo]) * frac
    }
}

pub fn median(values: &[f64]) -> Result<f64> {
    quantile(values, 0.5)
}

/// Constant predictor returning the training median.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MedianBaseline {
    pub value: f64,
}

impl MedianBaseline {
    pub fn fit(y_train: &[f64]) -> Result<Self> {
        Ok(MedianBaseline { value: median(y_train)? })
    }

    pub fn predict(&self, n: usize) -> Vec<f64> {
        vec![self.value; n]
    }

    pub fn mae(&self, truth: &[f64]) -> Result<f64> {
        mae(&self.predict(truth.len()), truth)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub partition: String,
    pub n: usize,
    pub srcc: f64,
    pub log10_p: f64,
    pub mae: f64,
}

impl ReportRow {
    pub fn p_value(&self) -> f64 {
        10f64.powf(self.log10_p)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvaluationReport {
    pub rows: Vec<ReportRow>,
    pub notices: Vec<String>,
}

impl EvaluationReport {
    pub fn row(&self, partition: &str) -> Option<&ReportRow> {
        self.rows.iter().find(|r| r.partition == partition)
    }

    /// `partition,n,srcc,p_value,mae`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["partition", "n", "srcc", "p_value", "mae"])?;
        for r in &self.rows {
            w.write_record([
                r.partition.clone(),
                r.n.to_string(),
                r.srcc.to_string(),
                format_pvalue(r.log10_p),
                r.mae.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Per-partition SRCC, p-value and MAE, one row per distinct label in order
/// of first appearance.
pub fn evaluation_report<L: AsRef<str>>(
    pred: &[f64],
    truth: &[f64],
    labels: &[L],
) -> Result<EvaluationReport> {
    let mut partitions: Vec<&str> = Vec::new();
    for l in labels {
        if !partitions.contains(&l.as_ref()) {
            partitions.push(l.as_ref());
        }
    }
    evaluation_report_for(pred, truth, labels, &partitions)
}

/// As [`evaluation_report`] but for an explicit list of partitions; requested
/// partitions with no samples are omitted and noted.
pub fn evaluation_report_for<L: AsRef<str>>(
    pred: &[f64],
    truth: &[f64],
    labels: &[L],
    partitions: &[&str],
) -> Result<EvaluationReport> {
    if pred.len() != truth.len() || labels.len() != truth.len() {
        return Err(Error::DimensionMismatch { expected: truth.len(), got: pred.len().min(labels.len()) });
    }
    let mut report = EvaluationReport::default();
    for &part in partitions {
        let (p, t): (Vec<f64>, Vec<f64>) = labels
            .iter()
            .zip(pred.iter().zip(truth))
            .filter(|(l, _)| l.as_ref() == part)
            .map(|(_, (p, t))| (*p, *t))
            .unzip();
        if p.is_empty() {
            report.notices.push(format!("partition `{part}` is empty; row omitted"));
            continue;
        }
        let err = mae(&p, &t)?;
        let (srcc, log10_p) = match spearman_test(&p, &t) {
            Ok(c) => (c.srcc, c.log10_p),
            Err(e) => {
                report.notices.push(format!("partition `{part}`: SRCC undefined ({e})"));
                (f64::NAN, f64::NAN)
            }
        };
        report.rows.push(ReportRow { partition: part.to_string(), n: p.len(), srcc, log10_p, mae: err });
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn monotone_and_reversed() {
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(), 1.0);
        assert_eq!(spearman(&[1.0, 2.0, 3.0], &[3.0, 2.0, 1.0]).unwrap(), -1.0);
    }

    #[test]
    fn tie_case_by_hand() {
        // ranks x: [1, 2.5, 2.5, 4], y: [1, 2, 3, 4]
        // centred: x [-1.5, 0, 0, 1.5], y [-1.5, -0.5, 0.5, 1.5]
        // sxy = 4.5, sxx = 4.5, syy = 5  =>  r = 4.5 / sqrt(22.5)
        let r = spearman(&[1.0, 2.0, 2.0, 4.0], &[1.0, 2.0, 3.0, 4.0]).unwrap();
        assert!((r - 4.5 / 22.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn spearman_errors() {
        assert!(spearman(&[1.0, 2.0], &[1.0, 2.0]).is_err());
        assert!(spearman(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
        assert!(spearman(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn ranks_average_ties() {
        assert_eq!(average_ranks(&[3.0, 1.0, 3.0, 2.0]), [3.5, 1.0, 3.5, 2.0]);
    }

    #[test]
    fn pvalue_null_and_perfect() {
        assert_eq!(spearman_pvalue(0.0, 17).unwrap(), 1.0);
        assert_eq!(spearman_pvalue(1.0, 17).unwrap(), 0.0);
        assert_eq!(spearman_pvalue(-1.0, 5).unwrap(), 0.0);
    }

    #[test]
    fn pvalue_table_magnitude() {
        let p = spearman_pvalue(0.5118, 450).unwrap();
        assert!(p > 2.1e-32 && p < 2.1e-30, "{p}");
    }

    // Student-t density for df = 8 integrated with composite Simpson.
    fn t_two_sided_tail_df8(t: f64) -> f64 {
        // Gamma(4.5) / (sqrt(8 pi) Gamma(4)) with Gamma(4.5) = 3.5*2.5*1.5*0.5*sqrt(pi)
        let norm = 3.5 * 2.5 * 1.5 * 0.5 / (8f64.sqrt() * 6.0);
        let pdf = |x: f64| norm * (1.0 + x * x / 8.0).powf(-4.5);
        let steps = 200_000;
        let h = t / steps as f64;
        let mut s = pdf(0.0) + pdf(t);
        for i in 1..steps {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            s += w * pdf(i as f64 * h);
        }
        1.0 - 2.0 * s * h / 3.0
    }

    #[test]
    fn pvalue_matches_quadrature() {
        let r: f64 = 0.9;
        let t = r * (8.0 / (1.0 - r * r)).sqrt();
        let oracle = t_two_sided_tail_df8(t);
        let p = spearman_pvalue(r, 10).unwrap();
        assert!((p - oracle).abs() < 1e-10, "{p} vs {oracle}");
    }

    #[test]
    fn tiny_pvalues_stay_finite_in_log() {
        let lp = spearman_log10_pvalue(0.9999, 5000).unwrap();
        assert!(lp.is_finite() && lp < -300.0, "{lp}");
        assert!(format_pvalue(lp).contains('e'));
        assert_eq!(format_pvalue(f64::NEG_INFINITY), "0");
    }

    #[test]
    fn mae_cases() {
        assert_eq!(mae(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        assert_eq!(mae(&[2.0, 3.0, 4.0], &[1.0, 2.0, 3.0]).unwrap(), 1.0);
        // |0.5| + |-2| + |3.25| + |0| = 5.75 over 4
        assert_eq!(mae(&[1.5, 0.0, 5.25, 7.0], &[1.0, 2.0, 2.0, 7.0]).unwrap(), 1.4375);
        assert!(mae(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile(&[4.0, 1.0, 3.0, 2.0], 0.5).unwrap(), 2.5);
        assert_eq!(quantile(&[1.0, 2.0, 3.0, 4.0, 5.0], 0.9).unwrap(), 4.6);
        assert_eq!(median(&[1.0, 2.0, 3.0]).unwrap(), 2.0);
    }

    #[test]
    fn baseline_symmetric() {
        let y = [1.0, 2.0, 3.0, 4.0, 5.0];
        let b = MedianBaseline::fit(&y).unwrap();
        assert_eq!(b.value, 3.0);
        assert_eq!(b.mae(&y).unwrap(), 6.0 / 5.0);
    }

    #[test]
    fn report_perfect_and_single_partition() {
        let t = [1.0, 2.0, 3.0, 4.0];
        let r = evaluation_report(&t, &t, &["test"; 4]).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.rows[0].srcc, 1.0);
        assert_eq!(r.rows[0].mae, 0.0);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "partition,n,srcc,p_value,mae\ntest,4,1,0,0\n");
    }

    #[test]
    fn report_composes_module_ops() {
        let pred = [1.0, 2.5, 2.0, 4.0, 0.5, 6.0, 7.5, 7.0];
        let truth = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
        let labels = ["a", "a", "a", "a", "b", "b", "b", "b"];
        let r = evaluation_report(&pred, &truth, &labels).unwrap();
        for (part, range) in [("a", 0..4), ("b", 4..8)] {
            let row = r.row(part).unwrap();
            let c = spearman_test(&pred[range.clone()], &truth[range.clone()]).unwrap();
            assert_eq!(row.srcc, c.srcc);
            assert_eq!(row.log10_p, c.log10_p);
            assert_eq!(row.mae, mae(&pred[range.clone()], &truth[range]).unwrap());
        }
    }

    #[test]
    fn report_empty_partition_notice() {
        let t = [1.0, 2.0, 3.0];
        let r = evaluation_report_for(&t, &t, &["train"; 3], &["train", "validate"]).unwrap();
        assert_eq!(r.rows.len(), 1);
        assert_eq!(r.notices.len(), 1);
        assert!(r.notices[0].contains("validate"));
    }
}

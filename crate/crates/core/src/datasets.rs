//! Datasets of `{-1,+1}` vectors: toy generation, Otsu binarization and CSV I/O.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{stream_rng, DATA_STREAM};

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub n: usize,
    /// Each point has `n` entries, all exactly `-1.0` or `+1.0`.
    pub points: Vec<Vec<f64>>,
    pub source: String,
}

impl Dataset {
    pub fn new(points: Vec<Vec<f64>>, source: impl Into<String>) -> Result<Self> {
        let n = points.first().map(Vec::len).ok_or(Error::EmptyDataset)?;
        for p in &points {
            if p.len() != n {
                return Err(Error::Dimension { expected: n, got: p.len() });
            }
            if p.iter().any(|&x| x != 1.0 && x != -1.0) {
                return Err(Error::Domain("dataset entries must be -1 or +1".into()));
            }
        }
        Ok(Self { n, points, source: source.into() })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Subset by index, keeping provenance.
    pub fn select(&self, indices: &[usize]) -> Dataset {
        Dataset {
            n: self.n,
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
            source: self.source.clone(),
        }
    }

    /// One row per point, comma-separated `-1`/`1`, no header.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * self.n * 3);
        for p in &self.points {
            for (i, &x) in p.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                out.push_str(if x > 0.0 { "1" } else { "-1" });
            }
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str, source: impl Into<String>) -> Result<Self> {
        let rows = parse_real_csv(text)?;
        Dataset::new(rows, source)
    }
}

/// Parses rows of reals; a first line that does not parse is taken as a header.
pub fn parse_real_csv(text: &str) -> Result<Vec<Vec<f64>>> {
    let mut rows = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if rows.is_empty() && line_no == 0 => continue,
            Err(e) => return Err(Error::Parse(format!("line {}: {e}", line_no + 1))),
        }
    }
    if rows.is_empty() {
        return Err(Error::EmptyDataset);
    }
    Ok(rows)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToySpec {
    pub n: usize,
    pub per_pattern: usize,
    pub flip_prob: f64,
    pub seed: u64,
}

impl Default for ToySpec {
    fn default() -> Self {
        Self { n: 20, per_pattern: 100, flip_prob: 0.15, seed: 0 }
    }
}

/// The four base patterns: all `+1`, all `-1`, first half `+1`, and its reverse.
pub fn toy_base_patterns(n: usize) -> [Vec<f64>; 4] {
    let half: Vec<f64> = (0..n).map(|i| if i < n / 2 { 1.0 } else { -1.0 }).collect();
    let reverse = half.iter().map(|x| -x).collect();
    [vec![1.0; n], vec![-1.0; n], half, reverse]
}

/// `per_pattern` noisy copies of each base pattern, each entry flipped independently.
pub fn gen_toy(spec: &ToySpec) -> Result<Dataset> {
    if !(0.0..=1.0).contains(&spec.flip_prob) {
        return Err(Error::Domain(format!("flip probability {} outside [0, 1]", spec.flip_prob)));
    }
    if spec.n == 0 || spec.per_pattern == 0 {
        return Err(Error::Domain("toy dataset needs n > 0 and per_pattern > 0".into()));
    }
    let mut rng = stream_rng(spec.seed, DATA_STREAM);
    let mut points = Vec::with_capacity(4 * spec.per_pattern);
    for base in toy_base_patterns(spec.n) {
        for _ in 0..spec.per_pattern {
            points.push(
                base.iter()
                    .map(|&x| if rng.gen::<f64>() < spec.flip_prob { -x } else { x })
                    .collect(),
            );
        }
    }
    Dataset::new(points, format!("toy(n={}, per_pattern={}, flip={}, seed={})", spec.n, spec.per_pattern, spec.flip_prob, spec.seed))
}

pub const OTSU_BINS: usize = 256;

/// Otsu threshold over a 256-bin histogram spanning `[min, max]`.
///
/// Returns the upper edge of the last bin of the lower class; values equal to
/// the threshold belong to the lower class.
pub fn otsu_threshold(values: &[f64]) -> Result<f64> {
    if values.iter().any(|x| !x.is_finite()) {
        return Err(Error::Domain("values must be finite".into()));
    }
    let (min, max) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    if values.is_empty() || !(max > min) {
        return Err(Error::Degenerate("Otsu threshold needs at least two distinct values".into()));
    }
    let width = (max - min) / OTSU_BINS as f64;
    let mut hist = [0usize; OTSU_BINS];
    for &x in values {
        let k = (((x - min) / width) as usize).min(OTSU_BINS - 1);
        hist[k] += 1;
    }
    let total = values.len() as f64;
    let centre = |k: usize| min + (k as f64 + 0.5) * width;
    let grand: f64 = hist.iter().enumerate().map(|(k, &c)| c as f64 * centre(k)).sum();

    let (mut count0, mut sum0) = (0.0, 0.0);
    let mut best = (f64::NEG_INFINITY, 0usize);
    for k in 0..OTSU_BINS - 1 {
        count0 += hist[k] as f64;
        sum0 += hist[k] as f64 * centre(k);
        let count1 = total - count0;
        if count0 == 0.0 || count1 == 0.0 {
            continue;
        }
        let (mu0, mu1) = (sum0 / count0, (grand - sum0) / count1);
        let between = count0 * count1 * (mu0 - mu1).powi(2);
        if between > best.0 {
            best = (between, k);
        }
    }
    Ok(min + (best.1 + 1) as f64 * width)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinarizeMode {
    /// One threshold per feature, computed across samples.
    ElementWise,
    /// One threshold per sample, computed across its features.
    PointWise,
}

/// Maps real rows to `{-1,+1}`: above the group's Otsu threshold is `+1`.
/// Constant groups map to `-1` and are reported in the second return value.
pub fn binarize(rows: &[Vec<f64>], mode: BinarizeMode, source: impl Into<String>) -> Result<(Dataset, Vec<usize>)> {
    let n = rows.first().map(Vec::len).ok_or(Error::EmptyDataset)?;
    if n == 0 {
        return Err(Error::EmptyDataset);
    }
    for r in rows {
        if r.len() != n {
            return Err(Error::Dimension { expected: n, got: r.len() });
        }
    }
    let mut out = vec![vec![-1.0; n]; rows.len()];
    let mut degenerate = Vec::new();
    match mode {
        BinarizeMode::ElementWise => {
            for i in 0..n {
                let column: Vec<f64> = rows.iter().map(|r| r[i]).collect();
                match otsu_threshold(&column) {
                    Ok(t) => rows.iter().zip(out.iter_mut()).for_each(|(r, o)| o[i] = sign_above(r[i], t)),
                    Err(Error::Degenerate(_)) => degenerate.push(i),
                    Err(e) => return Err(e),
                }
            }
        }
        BinarizeMode::PointWise => {
            for (mu, (r, o)) in rows.iter().zip(out.iter_mut()).enumerate() {
                match otsu_threshold(r) {
                    Ok(t) => o.iter_mut().zip(r).for_each(|(o, &x)| *o = sign_above(x, t)),
                    Err(Error::Degenerate(_)) => degenerate.push(mu),
                    Err(e) => return Err(e),
                }
            }
        }
    }
    if !degenerate.is_empty() {
        log::warn!("{} constant threshold group(s) mapped to -1", degenerate.len());
    }
    Ok((Dataset::new(out, source)?, degenerate))
}

#[inline]
fn sign_above(x: f64, threshold: f64) -> f64 {
    if x > threshold {
        1.0
    } else {
        -1.0
    }
}

/// Writes real rows as CSV (no header).
pub fn real_rows_to_csv(rows: &[Vec<f64>]) -> String {
    let mut out = String::new();
    for r in rows {
        for (i, x) in r.iter().enumerate() {
            if i > 0 {
                out.push(',');
            }
            let _ = write!(out, "{x}");
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, Normal};

    #[test]
    fn noiseless_toy_is_replicated_patterns() {
        let d = gen_toy(&ToySpec { flip_prob: 0.0, ..Default::default() }).unwrap();
        assert_eq!(d.len(), 400);
        let bases = toy_base_patterns(20);
        for (k, base) in bases.iter().enumerate() {
            assert!(d.points[k * 100..(k + 1) * 100].iter().all(|p| p == base));
        }
        assert_eq!(&bases[2][..10], &[1.0; 10]);
        assert_eq!(&bases[3][10..], &[1.0; 10]);
    }

    #[test]
    fn toy_flip_rate() {
        let d = gen_toy(&ToySpec { seed: 17, ..Default::default() }).unwrap();
        let bases = toy_base_patterns(20);
        let flips = d
            .points
            .iter()
            .enumerate()
            .map(|(mu, p)| p.iter().zip(&bases[mu / 100]).filter(|(a, b)| a != b).count())
            .sum::<usize>() as f64;
        let total = 8000.0;
        let sd = (0.15f64 * 0.85 / total).sqrt();
        assert!((flips / total - 0.15).abs() < 3.0 * sd);
    }

    #[test]
    fn toy_is_deterministic() {
        let spec = ToySpec { seed: 5, ..Default::default() };
        assert_eq!(gen_toy(&spec).unwrap(), gen_toy(&spec).unwrap());
        assert!(gen_toy(&ToySpec { flip_prob: 1.5, ..spec }).is_err());
    }

    #[test]
    fn otsu_separated_modes() {
        let values: Vec<f64> = std::iter::repeat(0.0).take(50).chain(std::iter::repeat(10.0).take(50)).collect();
        let t = otsu_threshold(&values).unwrap();
        assert!(t > 0.0 && t < 10.0);
        let t = otsu_threshold(&[3.0, 4.0]).unwrap();
        assert!(t >= 3.0 && t < 4.0);
    }

    #[test]
    fn otsu_rejects_constant_input() {
        assert!(matches!(otsu_threshold(&[2.0, 2.0, 2.0]), Err(Error::Degenerate(_))));
        assert!(otsu_threshold(&[]).is_err());
    }

    /// Exhaustive sweep over split points of the sorted sample.
    fn sweep_oracle(values: &[f64]) -> f64 {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let total: f64 = v.iter().sum();
        let n = v.len() as f64;
        let mut prefix = 0.0;
        let mut best = (f64::NEG_INFINITY, 0.0);
        for k in 0..v.len() - 1 {
            prefix += v[k];
            let (n0, n1) = ((k + 1) as f64, n - (k + 1) as f64);
            let between = n0 * n1 * (prefix / n0 - (total - prefix) / n1).powi(2);
            if between > best.0 {
                best = (between, 0.5 * (v[k] + v[k + 1]));
            }
        }
        best.1
    }

    #[test]
    fn otsu_gaussian_mixture() {
        let mut rng = stream_rng(3, 0);
        let (a, b) = (Normal::new(0.0, 1.0).unwrap(), Normal::new(6.0, 1.0).unwrap());
        let values: Vec<f64> = (0..10_000).map(|k| if k % 2 == 0 { a.sample(&mut rng) } else { b.sample(&mut rng) }).collect();
        let oracle = sweep_oracle(&values);
        assert!((oracle - 3.0).abs() < 0.5);
        let t = otsu_threshold(&values).unwrap();
        assert!((t - 3.0).abs() < 0.5, "{t}");
        assert!((t - oracle).abs() < 0.2);
    }

    #[test]
    fn element_wise_column() {
        let rows = vec![vec![1.0], vec![2.0], vec![9.0], vec![10.0]];
        let (d, degenerate) = binarize(&rows, BinarizeMode::ElementWise, "t").unwrap();
        assert!(degenerate.is_empty());
        let col: Vec<f64> = d.points.iter().map(|p| p[0]).collect();
        assert_eq!(col, vec![-1.0, -1.0, 1.0, 1.0]);
    }

    #[test]
    fn point_wise_matches_definition() {
        let sample = vec![0.1, 0.9, 0.85, 0.2, 0.05, 0.7, 0.95, 0.3];
        let t = otsu_threshold(&sample).unwrap();
        let (d, _) = binarize(&[sample.clone()], BinarizeMode::PointWise, "t").unwrap();
        let want: Vec<f64> = sample.iter().map(|&x| if x > t { 1.0 } else { -1.0 }).collect();
        assert_eq!(d.points[0], want);
    }

    #[test]
    fn two_level_corpus_is_recovered() {
        let truth = toy_base_patterns(12);
        let mut rng = stream_rng(8, 0);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|k| {
                let (lo, hi) = (10.0 + 5.0 * rng.gen::<f64>(), 200.0 + 40.0 * rng.gen::<f64>());
                truth[k % 4].iter().map(|&x| if x > 0.0 { hi + rng.gen::<f64>() } else { lo + rng.gen::<f64>() }).collect()
            })
            .collect();
        let (d, degenerate) = binarize(&rows, BinarizeMode::PointWise, "t").unwrap();
        // Rows of patterns 0 and 1 are one level plus noise; per-row thresholds
        // only split the noise there, so only the two-level rows are checked.
        assert!(degenerate.is_empty());
        for (k, p) in d.points.iter().enumerate().filter(|(k, _)| k % 4 >= 2) {
            assert_eq!(p, &truth[k % 4]);
        }
        let (d, degenerate) = binarize(&rows, BinarizeMode::ElementWise, "t").unwrap();
        assert!(degenerate.is_empty());
        for (k, p) in d.points.iter().enumerate() {
            assert_eq!(p, &truth[k % 4]);
        }
    }

    #[test]
    fn constant_group_maps_to_minus_one() {
        let rows = vec![vec![1.0, 5.0], vec![2.0, 5.0]];
        let (d, degenerate) = binarize(&rows, BinarizeMode::ElementWise, "t").unwrap();
        assert_eq!(degenerate, vec![1]);
        assert!(d.points.iter().all(|p| p[1] == -1.0));
        assert!(matches!(binarize(&[], BinarizeMode::PointWise, "t"), Err(Error::EmptyDataset)));
    }

    #[test]
    fn csv_round_trip_and_validation() {
        let d = gen_toy(&ToySpec { n: 6, per_pattern: 3, ..Default::default() }).unwrap();
        let back = Dataset::from_csv(&d.to_csv(), d.source.clone()).unwrap();
        assert_eq!(back, d);
        assert!(Dataset::from_csv("1,-1\n1,0\n", "x").is_err());
        assert!(Dataset::from_csv("1,-1\n1\n", "x").is_err());
        let rows = parse_real_csv("a,b\n1.5,2\n3,4\n").unwrap();
        assert_eq!(rows, vec![vec![1.5, 2.0], vec![3.0, 4.0]]);
    }
}

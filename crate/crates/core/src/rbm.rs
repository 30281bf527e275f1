//! Concrete Bernoulli-Bernoulli RBM with `{-1,+1}` visible units.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::meanfield::{log_two_cosh, softplus, HiddenSpace};

/// Largest visible layer for which exact enumeration is allowed.
pub const ENUMERATION_CAP: usize = 25;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rbm {
    pub n: usize,
    pub m: usize,
    pub hidden: HiddenSpace,
    pub b: Vec<f64>,
    pub c: Vec<f64>,
    /// Row-major `n x m`.
    pub w: Vec<f64>,
}

#[inline]
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl HiddenSpace {
    /// `ln sum_h exp(a h)` for one hidden unit.
    #[inline]
    pub fn log_partition(self, a: f64) -> f64 {
        match self {
            HiddenSpace::Ising => log_two_cosh(a),
            HiddenSpace::Binary => softplus(a),
        }
    }

    /// `E[h]` for one hidden unit with input `a`.
    #[inline]
    pub fn mean(self, a: f64) -> f64 {
        match self {
            HiddenSpace::Ising => a.tanh(),
            HiddenSpace::Binary => sigmoid(a),
        }
    }

    /// Probability of the "on" state (`+1` or `1`) given input `a`.
    #[inline]
    pub fn on_probability(self, a: f64) -> f64 {
        match self {
            HiddenSpace::Ising => sigmoid(2.0 * a),
            HiddenSpace::Binary => sigmoid(a),
        }
    }

    #[inline]
    pub fn off_value(self) -> f64 {
        self.states()[0]
    }
}

/// Visible configuration encoded by the low `n` bits of `index` (bit set means `+1`).
pub fn visible_state(index: u64, n: usize) -> Vec<f64> {
    (0..n).map(|i| if index >> i & 1 == 1 { 1.0 } else { -1.0 }).collect()
}

impl Rbm {
    /// All-zero parameters.
    pub fn zeros(n: usize, m: usize, hidden: HiddenSpace) -> Self {
        Self { n, m, hidden, b: vec![0.0; n], c: vec![0.0; m], w: vec![0.0; n * m] }
    }

    pub fn from_parts(hidden: HiddenSpace, b: Vec<f64>, c: Vec<f64>, w: Vec<f64>) -> Result<Self> {
        let rbm = Self { n: b.len(), m: c.len(), hidden, b, c, w };
        rbm.validate()?;
        Ok(rbm)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.m == 0 {
            return Err(Error::Domain("layer sizes must be positive".into()));
        }
        check_len(self.n, self.b.len())?;
        check_len(self.m, self.c.len())?;
        check_len(self.n * self.m, self.w.len())?;
        if self.b.iter().chain(&self.c).chain(&self.w).any(|x| !x.is_finite()) {
            return Err(Error::Domain("parameters must be finite".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        self.w[i * self.m + j]
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let rbm: Rbm = serde_json::from_str(text)?;
        rbm.validate()?;
        Ok(rbm)
    }

    /// `-(b.v + c.h + v^T W h)`.
    pub fn neg_log_unnorm(&self, v: &[f64], h: &[f64]) -> Result<f64> {
        check_len(self.n, v.len())?;
        check_len(self.m, h.len())?;
        let mut s: f64 = self.b.iter().zip(v).map(|(b, v)| b * v).sum();
        s += self.c.iter().zip(h).map(|(c, h)| c * h).sum::<f64>();
        for (i, &vi) in v.iter().enumerate() {
            let row = &self.w[i * self.m..(i + 1) * self.m];
            s += vi * row.iter().zip(h).map(|(w, h)| w * h).sum::<f64>();
        }
        Ok(-s)
    }

    /// Hidden inputs `a_j = c_j + sum_i w_ij v_i`.
    pub fn hidden_input(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, v.len())?;
        Ok(self.hidden_input_unchecked(v))
    }

    pub(crate) fn hidden_input_unchecked(&self, v: &[f64]) -> Vec<f64> {
        let mut a = self.c.clone();
        self.hidden_input_into(v, &mut a);
        a
    }

    #[inline]
    pub(crate) fn hidden_input_into(&self, v: &[f64], a: &mut [f64]) {
        a.copy_from_slice(&self.c);
        for (i, &vi) in v.iter().enumerate() {
            let row = &self.w[i * self.m..(i + 1) * self.m];
            if vi > 0.0 {
                a.iter_mut().zip(row).for_each(|(a, w)| *a += w);
            } else {
                a.iter_mut().zip(row).for_each(|(a, w)| *a -= w);
            }
        }
    }

    /// Visible inputs `b_i + sum_j w_ij h_j`.
    pub(crate) fn visible_input_into(&self, h: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            let row = &self.w[i * self.m..(i + 1) * self.m];
            *o = self.b[i] + row.iter().zip(h).map(|(w, h)| w * h).sum::<f64>();
        }
    }

    /// `ln sum_h exp(-E(v, h))`: the hidden layer summed out analytically.
    pub fn visible_log_unnorm(&self, v: &[f64]) -> Result<f64> {
        check_len(self.n, v.len())?;
        Ok(self.visible_log_unnorm_unchecked(v))
    }

    pub(crate) fn visible_log_unnorm_unchecked(&self, v: &[f64]) -> f64 {
        let a = self.hidden_input_unchecked(v);
        let bias: f64 = self.b.iter().zip(v).map(|(b, v)| b * v).sum();
        bias + a.iter().map(|&a| self.hidden.log_partition(a)).sum::<f64>()
    }

    /// `ln Z` by log-sum-exp over all `2^n` visible states.
    pub fn log_partition_exact(&self) -> Result<f64> {
        if self.n > ENUMERATION_CAP {
            return Err(Error::EnumerationCap { n: self.n, cap: ENUMERATION_CAP });
        }
        // Gray-code walk: one visible flip per step updates `a` in O(m).
        let mut v = vec![-1.0; self.n];
        let mut a = self.hidden_input_unchecked(&v);
        let mut bias: f64 = -self.b.iter().sum::<f64>();
        let log_unnorm = |a: &[f64], bias: f64| bias + a.iter().map(|&x| self.hidden.log_partition(x)).sum::<f64>();

        let mut max = log_unnorm(&a, bias);
        let mut sum = 1.0;
        for k in 1u64..(1u64 << self.n) {
            let i = k.trailing_zeros() as usize;
            v[i] = -v[i];
            let step = 2.0 * v[i];
            bias += step * self.b[i];
            let row = &self.w[i * self.m..(i + 1) * self.m];
            a.iter_mut().zip(row).for_each(|(a, w)| *a += step * w);
            let l = log_unnorm(&a, bias);
            if l > max {
                sum = sum * (max - l).exp() + 1.0;
                max = l;
            } else {
                sum += (l - max).exp();
            }
        }
        Ok(max + sum.ln())
    }

    /// `P(h_j = on | v)` per hidden unit (on is `+1` or `1`).
    pub fn hidden_conditional(&self, v: &[f64]) -> Result<Vec<f64>> {
        let a = self.hidden_input(v)?;
        Ok(a.into_iter().map(|a| self.hidden.on_probability(a)).collect())
    }

    /// `P(v_i = +1 | h)` per visible unit.
    pub fn visible_conditional(&self, h: &[f64]) -> Result<Vec<f64>> {
        check_len(self.m, h.len())?;
        let mut out = vec![0.0; self.n];
        self.visible_input_into(h, &mut out);
        Ok(out.into_iter().map(|x| sigmoid(2.0 * x)).collect())
    }

    /// One blocked Gibbs sweep: `h' ~ P(h | v)`, then `v' ~ P(v | h')`.
    pub fn gibbs_sweep<R: Rng + ?Sized>(&self, v: &[f64], rng: &mut R) -> Result<(Vec<f64>, Vec<f64>)> {
        check_len(self.n, v.len())?;
        let mut v_next = v.to_vec();
        let mut h = vec![0.0; self.m];
        let mut scratch = vec![0.0; self.n.max(self.m)];
        self.gibbs_sweep_in_place(&mut v_next, &mut h, &mut scratch, rng);
        Ok((v_next, h))
    }

    /// Allocation-free sweep; `scratch` must hold `max(n, m)` entries.
    pub(crate) fn gibbs_sweep_in_place<R: Rng + ?Sized>(&self, v: &mut [f64], h: &mut [f64], scratch: &mut [f64], rng: &mut R) {
        let (on, off) = (1.0, self.hidden.off_value());
        let a = &mut scratch[..self.m];
        self.hidden_input_into(v, a);
        for (h, &a) in h.iter_mut().zip(a.iter()) {
            *h = if rng.gen::<f64>() < self.hidden.on_probability(a) { on } else { off };
        }
        let x = &mut scratch[..self.n];
        self.visible_input_into(h, x);
        for (v, &x) in v.iter_mut().zip(x.iter()) {
            *v = if rng.gen::<f64>() < sigmoid(2.0 * x) { 1.0 } else { -1.0 };
        }
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(Error::Dimension { expected, got });
    }
    Ok(())
}

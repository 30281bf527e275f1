//! Exact model expectations by enumerating the visible layer.
//!
//! The visible units are split into a low half `A` and a high half `B`, so the
//! hidden input is `a_j = aA_j(vA) + aB_j(vB)`. With both halves tabulated as
//! `exp(+-a)`, each unit's partition factor and mean take a handful of
//! multiplications. Cross moments `E[v_i h_j]` are accumulated per half: for
//! `i` in `B` through per-block sums, for `i` in `A` through per-`vA` sums.
//! That is `O(m)` work per visible state instead of `O(n m)`.

use crate::error::{Error, Result};
use crate::meanfield::HiddenSpace;
use crate::rbm::{Rbm, ENUMERATION_CAP};

/// Moments of the RBM's joint distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelStatistics {
    pub log_z: f64,
    pub mean_v: Vec<f64>,
    pub mean_h: Vec<f64>,
    /// `E[v_i h_j]`, row-major `n x m`.
    pub mean_vh: Vec<f64>,
}

/// Beyond this per-half input magnitude the stable (transcendental) path is used.
const FAST_PATH_LIMIT: f64 = 250.0;

struct Half {
    bits: usize,
    offset: usize,
    /// `[state * m + j]`
    input: Vec<f64>,
    bias: Vec<f64>,
}

impl Half {
    fn new(rbm: &Rbm, offset: usize, bits: usize, with_c: bool) -> Self {
        let m = rbm.m;
        let size = 1usize << bits;
        let mut input = vec![0.0; size * m];
        let mut bias = vec![0.0; size];
        for x in 0..size {
            let row = &mut input[x * m..(x + 1) * m];
            if with_c {
                row.copy_from_slice(&rbm.c);
            }
            for k in 0..bits {
                let i = offset + k;
                let s = spin(x, k);
                bias[x] += s * rbm.b[i];
                let w = &rbm.w[i * m..(i + 1) * m];
                row.iter_mut().zip(w).for_each(|(a, w)| *a += s * w);
            }
        }
        Self { bits, offset, input, bias }
    }

    fn max_abs_input(&self) -> f64 {
        self.input.iter().fold(0.0, |acc, x| acc.max(x.abs()))
    }
}

/// Product with four independent accumulators, so the multiplies pipeline.
#[inline]
fn product(xs: &[f64]) -> f64 {
    let mut acc = [1.0; 4];
    let chunks = xs.chunks_exact(4);
    let tail: f64 = chunks.remainder().iter().product();
    for c in chunks {
        acc.iter_mut().zip(c).for_each(|(a, x)| *a *= x);
    }
    (acc[0] * acc[1]) * (acc[2] * acc[3]) * tail
}

#[inline]
fn spin(x: usize, k: usize) -> f64 {
    if x >> k & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// Exact `ln Z` and first/cross moments.
pub fn model_statistics(rbm: &Rbm) -> Result<ModelStatistics> {
    rbm.validate()?;
    let (n, m) = (rbm.n, rbm.m);
    if n > ENUMERATION_CAP {
        return Err(Error::EnumerationCap { n, cap: ENUMERATION_CAP });
    }
    let bits_a = n / 2;
    let half_a = Half::new(rbm, 0, bits_a, false);
    let half_b = Half::new(rbm, bits_a, n - bits_a, true);
    let size_a = 1usize << half_a.bits;
    let size_b = 1usize << half_b.bits;
    let fast = half_a.max_abs_input() + half_b.max_abs_input() < FAST_PATH_LIMIT;
    let ising = rbm.hidden == HiddenSpace::Ising;

    let exp_table = |input: &[f64], sign: f64| -> Vec<f64> {
        if fast {
            input.iter().map(|a| (sign * a).exp()).collect()
        } else {
            Vec::new()
        }
    };
    let (ea, eb) = (exp_table(&half_a.input, 1.0), exp_table(&half_b.input, 1.0));
    let (ea_inv, eb_inv) = if ising {
        (exp_table(&half_a.input, -1.0), exp_table(&half_b.input, -1.0))
    } else {
        (Vec::new(), Vec::new())
    };

    // Accumulators, all scaled by exp(-shift).
    let mut shift = f64::NEG_INFINITY;
    let mut total = 0.0;
    let mut mass_a = vec![0.0; size_a];
    let mut cross_a = vec![0.0; size_a * m];
    let mut mean_v = vec![0.0; n];
    let mut mean_h = vec![0.0; m];
    let mut mean_vh = vec![0.0; n * m];

    let mut log_unnorm = vec![0.0; size_a];
    let mut means = vec![0.0; size_a * m];
    let mut factors = vec![0.0; m];
    let mut block_cross = vec![0.0; m];

    for xb in 0..size_b {
        let eb_row = if fast { &eb[xb * m..(xb + 1) * m] } else { &[][..] };
        let eb_inv_row = if fast && ising { &eb_inv[xb * m..(xb + 1) * m] } else { &[][..] };
        let ib_row = &half_b.input[xb * m..(xb + 1) * m];
        let mut block_max = f64::NEG_INFINITY;

        for xa in 0..size_a {
            let t = &mut means[xa * m..(xa + 1) * m];
            let mut log_sum = f64::NAN;
            if fast {
                let ea_row = &ea[xa * m..(xa + 1) * m];
                if ising {
                    let ea_inv_row = &ea_inv[xa * m..(xa + 1) * m];
                    let inv = ea_inv_row.iter().zip(eb_inv_row);
                    for (((f, t), (pa, pb)), (qa, qb)) in factors.iter_mut().zip(t.iter_mut()).zip(ea_row.iter().zip(eb_row)).zip(inv) {
                        let (p, q) = (pa * pb, qa * qb);
                        *f = p + q;
                        *t = (p - q) / *f;
                    }
                } else {
                    for ((f, t), (pa, pb)) in factors.iter_mut().zip(t.iter_mut()).zip(ea_row.iter().zip(eb_row)) {
                        let p = pa * pb;
                        *f = 1.0 + p;
                        *t = p / *f;
                    }
                }
                let prod = product(&factors);
                if prod.is_finite() && prod > 0.0 {
                    log_sum = prod.ln();
                } else {
                    log_sum = factors.iter().map(|f| f.ln()).sum();
                }
            }
            if !log_sum.is_finite() {
                let ia_row = &half_a.input[xa * m..(xa + 1) * m];
                log_sum = 0.0;
                for j in 0..m {
                    let a = ia_row[j] + ib_row[j];
                    log_sum += rbm.hidden.log_partition(a);
                    t[j] = rbm.hidden.mean(a);
                }
            }
            let l = half_a.bias[xa] + half_b.bias[xb] + log_sum;
            log_unnorm[xa] = l;
            block_max = block_max.max(l);
        }

        if block_max > shift {
            let scale = (shift - block_max).exp();
            total *= scale;
            mass_a.iter_mut().chain(cross_a.iter_mut()).for_each(|x| *x *= scale);
            mean_v.iter_mut().chain(mean_h.iter_mut()).chain(mean_vh.iter_mut()).for_each(|x| *x *= scale);
            shift = block_max;
        }

        let mut block_mass = 0.0;
        block_cross.iter_mut().for_each(|x| *x = 0.0);
        for xa in 0..size_a {
            let p = (log_unnorm[xa] - shift).exp();
            block_mass += p;
            mass_a[xa] += p;
            let t = &means[xa * m..(xa + 1) * m];
            let acc = &mut cross_a[xa * m..(xa + 1) * m];
            for j in 0..m {
                let r = p * t[j];
                acc[j] += r;
                block_cross[j] += r;
            }
        }
        total += block_mass;
        mean_h.iter_mut().zip(&block_cross).for_each(|(h, r)| *h += r);
        for k in 0..half_b.bits {
            let i = half_b.offset + k;
            let s = spin(xb, k);
            mean_v[i] += s * block_mass;
            mean_vh[i * m..(i + 1) * m].iter_mut().zip(&block_cross).for_each(|(x, r)| *x += s * r);
        }
    }

    for xa in 0..size_a {
        for k in 0..half_a.bits {
            let s = spin(xa, k);
            mean_v[k] += s * mass_a[xa];
            let acc = &cross_a[xa * m..(xa + 1) * m];
            mean_vh[k * m..(k + 1) * m].iter_mut().zip(acc).for_each(|(x, r)| *x += s * r);
        }
    }
    let inv = 1.0 / total;
    mean_v.iter_mut().chain(mean_h.iter_mut()).chain(mean_vh.iter_mut()).for_each(|x| *x *= inv);
    Ok(ModelStatistics { log_z: shift + total.ln(), mean_v, mean_h, mean_vh })
}

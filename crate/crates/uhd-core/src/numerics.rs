//! Dense numerics: matmul, normalization, activations, masked attention.
//!
//! Everything here is a pure function over immutable inputs with a pinned
//! accumulation order (sequential over the contraction axis), so outputs are
//! bitwise reproducible across runs and across thread counts. Parallelism
//! only ever splits disjoint output rows.

use crate::error::{Error, Result};
use crate::parallel::for_each_chunk_mut;
use crate::scalar::Scalar;
use crate::tensor::DenseTensor;

/// Token-grid dimensions of one view.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TokenGrid {
    pub rows: usize,
    pub cols: usize,
}

impl TokenGrid {
    pub fn new(rows: usize, cols: usize) -> Self {
        Self { rows, cols }
    }

    pub fn tokens(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_even(&self) -> bool {
        self.rows % 2 == 0 && self.cols % 2 == 0
    }

    /// Grid after one 2x2 merge step.
    pub fn halved(&self) -> Self {
        Self {
            rows: self.rows / 2,
            cols: self.cols / 2,
        }
    }
}

/// Attention scope over a packed token sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AttentionMask {
    /// Every token attends to every token.
    Dense,
    /// Per-view locality: token ranges attend only within their own range.
    /// Ranges are `(start, end)` pairs, disjoint, sorted, covering `[0, N)`.
    BlockDiagonal { blocks: Vec<(usize, usize)> },
    /// Non-overlapping 2x2 window locality within each view grid.
    Windowed2x2 { views: Vec<TokenGrid> },
}

impl AttentionMask {
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            AttentionMask::Dense => Ok(()),
            AttentionMask::BlockDiagonal { blocks } => {
                let mut cursor = 0;
                for &(start, end) in blocks {
                    if start != cursor || end <= start {
                        return Err(Error::Config(format!(
                            "block ranges must be sorted, disjoint, and cover [0, {n}); got {blocks:?}"
                        )));
                    }
                    cursor = end;
                }
                if cursor != n {
                    return Err(Error::Config(format!(
                        "block ranges cover [0, {cursor}) but sequence has {n} tokens"
                    )));
                }
                Ok(())
            }
            AttentionMask::Windowed2x2 { views } => {
                let mut total = 0;
                for g in views {
                    if !g.is_even() {
                        return Err(Error::Geometry(format!(
                            "windowed mask requires even token grids, got {}x{}",
                            g.rows, g.cols
                        )));
                    }
                    total += g.tokens();
                }
                if total != n {
                    return Err(Error::Config(format!(
                        "windowed mask covers {total} tokens but sequence has {n}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Attention-group id per token: tokens may attend each other iff their
    /// ids match. Unifies all three mask kinds.
    pub fn group_ids(&self, n: usize) -> Result<Vec<u32>> {
        self.validate(n)?;
        match self {
            AttentionMask::Dense => Ok(vec![0; n]),
            AttentionMask::BlockDiagonal { blocks } => {
                let mut ids = vec![0u32; n];
                for (b, &(start, end)) in blocks.iter().enumerate() {
                    ids[start..end].iter_mut().for_each(|x| *x = b as u32);
                }
                Ok(ids)
            }
            AttentionMask::Windowed2x2 { views } => {
                let mut ids = Vec::with_capacity(n);
                let mut base = 0u32;
                for g in views {
                    let wcols = (g.cols / 2) as u32;
                    for r in 0..g.rows {
                        for c in 0..g.cols {
                            ids.push(base + (r as u32 / 2) * wcols + c as u32 / 2);
                        }
                    }
                    base += ((g.rows / 2) * (g.cols / 2)) as u32;
                }
                Ok(ids)
            }
        }
    }
}

/// Multiply-accumulate counter for the cost-model cross-check.
///
/// Counts are recorded on the calling thread before any parallel dispatch,
/// so parallel execution does not scatter them across thread locals. Only
/// matmul-class operations are counted.
pub mod macs {
    use std::cell::Cell;

    thread_local! {
        static COUNT: Cell<u64> = const { Cell::new(0) };
    }

    pub fn reset() {
        COUNT.with(|c| c.set(0));
    }

    pub fn total() -> u64 {
        COUNT.with(|c| c.get())
    }

    pub(crate) fn add(n: u64) {
        COUNT.with(|c| c.set(c.get() + n));
    }
}

/// Standard matrix product `[M x K] * [K x P] -> [M x P]`.
///
/// Accumulation is sequential over K for every output element.
pub fn matmul<T: Scalar>(a: &DenseTensor<T>, b: &DenseTensor<T>) -> Result<DenseTensor<T>> {
    let (m, k) = (a.rows(), a.cols());
    let (k2, p) = (b.rows(), b.cols());
    if k != k2 {
        return Err(Error::Dimension(format!(
            "matmul inner dims {k} vs {k2}"
        )));
    }
    macs::add((m * k * p) as u64);
    let mut out = DenseTensor::zeros(vec![m, p]);
    let b_data = b.data();
    for_each_chunk_mut(out.data_mut(), p, |row, out_row| {
        let a_row = a.row(row);
        for (kk, &a_mk) in a_row.iter().enumerate() {
            let b_row = &b_data[kk * p..(kk + 1) * p];
            for (o, &b_kp) in out_row.iter_mut().zip(b_row) {
                *o += a_mk * b_kp;
            }
        }
    });
    out.debug_check_finite();
    Ok(out)
}

/// `[M x K] * [P x K]^T -> [M x P]`; used for attention scores.
pub fn matmul_nt<T: Scalar>(a: &DenseTensor<T>, b: &DenseTensor<T>) -> Result<DenseTensor<T>> {
    let (m, k) = (a.rows(), a.cols());
    let (p, k2) = (b.rows(), b.cols());
    if k != k2 {
        return Err(Error::Dimension(format!(
            "matmul_nt inner dims {k} vs {k2}"
        )));
    }
    macs::add((m * k * p) as u64);
    let mut out = DenseTensor::zeros(vec![m, p]);
    for_each_chunk_mut(out.data_mut(), p, |row, out_row| {
        let a_row = a.row(row);
        for (j, o) in out_row.iter_mut().enumerate() {
            let b_row = b.row(j);
            let mut acc = T::ZERO;
            for (&x, &w) in a_row.iter().zip(b_row) {
                acc += x * w;
            }
            *o = acc;
        }
    });
    out.debug_check_finite();
    Ok(out)
}

/// Affine projection `y = x * W^T + b` with `W` stored `[out x in]`.
pub fn linear<T: Scalar>(
    x: &DenseTensor<T>,
    w: &DenseTensor<T>,
    bias: &[T],
) -> Result<DenseTensor<T>> {
    let (n, d_in) = (x.rows(), x.cols());
    let (d_out, d_in2) = (w.rows(), w.cols());
    if d_in != d_in2 || bias.len() != d_out {
        return Err(Error::Dimension(format!(
            "linear shapes: x[{n}x{d_in}], w[{d_out}x{d_in2}], b[{}]",
            bias.len()
        )));
    }
    macs::add((n * d_in * d_out) as u64);
    let mut out = DenseTensor::zeros(vec![n, d_out]);
    for_each_chunk_mut(out.data_mut(), d_out, |row, out_row| {
        let x_row = x.row(row);
        for (j, o) in out_row.iter_mut().enumerate() {
            let w_row = w.row(j);
            let mut acc = bias[j];
            for (&xi, &wi) in x_row.iter().zip(w_row) {
                acc += xi * wi;
            }
            *o = acc;
        }
    });
    out.debug_check_finite();
    Ok(out)
}

/// Row-wise layer normalization with affine parameters.
pub fn layer_norm<T: Scalar>(
    x: &DenseTensor<T>,
    gamma: &[T],
    beta: &[T],
    eps: f64,
) -> Result<DenseTensor<T>> {
    let d = x.cols();
    if gamma.len() != d || beta.len() != d {
        return Err(Error::Dimension(format!(
            "layer_norm affine length {} / {} vs width {d}",
            gamma.len(),
            beta.len()
        )));
    }
    if eps <= 0.0 {
        return Err(Error::Config("layer_norm eps must be positive".into()));
    }
    let eps = T::from_f64(eps);
    let inv_d = T::from_f64(1.0 / d as f64);
    let mut out = x.clone();
    for_each_chunk_mut(out.data_mut(), d, |_, row| {
        let mut mean = T::ZERO;
        for &v in row.iter() {
            mean += v;
        }
        mean = mean * inv_d;
        let mut var = T::ZERO;
        for &v in row.iter() {
            let c = v - mean;
            var += c * c;
        }
        var = var * inv_d;
        let inv_std = T::ONE / (var + eps).sqrt();
        for (v, (&g, &b)) in row.iter_mut().zip(gamma.iter().zip(beta)) {
            *v = (*v - mean) * inv_std * g + b;
        }
    });
    out.debug_check_finite();
    Ok(out)
}

/// Row-wise softmax with an optional boolean keep-pattern.
///
/// Masked entries come out exactly 0.0; each row is stabilized by
/// subtracting its max over unmasked entries. A fully masked row is an
/// error.
pub fn softmax_rows<T: Scalar>(
    x: &DenseTensor<T>,
    mask: Option<&[bool]>,
) -> Result<DenseTensor<T>> {
    let (m, p) = (x.rows(), x.cols());
    if let Some(mask) = mask {
        if mask.len() != m * p {
            return Err(Error::Dimension(format!(
                "softmax mask length {} vs {}x{}",
                mask.len(),
                m,
                p
            )));
        }
        for row in 0..m {
            if mask[row * p..(row + 1) * p].iter().all(|&keep| !keep) {
                return Err(Error::DegenerateMask { row });
            }
        }
    }
    let mut out = x.clone();
    let keep = |row: usize, j: usize| mask.is_none_or(|m| m[row * p + j]);
    for_each_chunk_mut(out.data_mut(), p, |row, r| {
        let mut max = T::MASK_NEG;
        for (j, &v) in r.iter().enumerate() {
            if keep(row, j) && v > max {
                max = v;
            }
        }
        let mut sum = T::ZERO;
        for (j, v) in r.iter_mut().enumerate() {
            if keep(row, j) {
                *v = (*v - max).exp();
                sum += *v;
            } else {
                *v = T::ZERO;
            }
        }
        let inv = T::ONE / sum;
        for (j, v) in r.iter_mut().enumerate() {
            if keep(row, j) {
                *v = *v * inv;
            }
        }
    });
    out.debug_check_finite();
    Ok(out)
}

/// Elementwise exact (erf-based) GELU.
pub fn gelu<T: Scalar>(x: &DenseTensor<T>) -> DenseTensor<T> {
    let out = x.map(Scalar::gelu);
    out.debug_check_finite();
    out
}

/// One attention sub-block's projections (`W` stored `[out x in]`).
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights<T: Scalar> {
    pub w_q: DenseTensor<T>,
    pub b_q: Vec<T>,
    pub w_k: DenseTensor<T>,
    pub b_k: Vec<T>,
    pub w_v: DenseTensor<T>,
    pub b_v: Vec<T>,
    pub w_o: DenseTensor<T>,
    pub b_o: Vec<T>,
}

impl<T: Scalar> AttentionWeights<T> {
    pub fn seeded(d: usize, rng: &mut crate::rng::SeededRng) -> Self {
        let mut mat = |rng: &mut crate::rng::SeededRng| {
            DenseTensor::new(vec![d, d], rng.fill_weights(d * d)).expect("square weight")
        };
        let w_q = mat(rng);
        let b_q = rng.fill_weights(d);
        let w_k = mat(rng);
        let b_k = rng.fill_weights(d);
        let w_v = mat(rng);
        let b_v = rng.fill_weights(d);
        let w_o = mat(rng);
        let b_o = rng.fill_weights(d);
        Self {
            w_q,
            b_q,
            w_k,
            b_k,
            w_v,
            b_v,
            w_o,
            b_o,
        }
    }

    pub fn zeros(d: usize) -> Self {
        Self {
            w_q: DenseTensor::zeros(vec![d, d]),
            b_q: vec![T::ZERO; d],
            w_k: DenseTensor::zeros(vec![d, d]),
            b_k: vec![T::ZERO; d],
            w_v: DenseTensor::zeros(vec![d, d]),
            b_v: vec![T::ZERO; d],
            w_o: DenseTensor::zeros(vec![d, d]),
            b_o: vec![T::ZERO; d],
        }
    }

    pub fn width(&self) -> usize {
        self.w_q.rows()
    }
}

fn extract_cols<T: Scalar>(x: &DenseTensor<T>, start: usize, width: usize) -> DenseTensor<T> {
    let n = x.rows();
    let mut out = DenseTensor::zeros(vec![n, width]);
    for r in 0..n {
        out.row_mut(r).copy_from_slice(&x.row(r)[start..start + width]);
    }
    out
}

/// Multi-head attention with scores pushed to -inf outside the mask before
/// softmax; masked probabilities are exactly zero.
pub fn masked_mha<T: Scalar>(
    x: &DenseTensor<T>,
    w: &AttentionWeights<T>,
    heads: usize,
    mask: &AttentionMask,
) -> Result<DenseTensor<T>> {
    let (n, d) = (x.rows(), x.cols());
    if w.width() != d {
        return Err(Error::Dimension(format!(
            "attention weights width {} vs tokens width {d}",
            w.width()
        )));
    }
    if heads == 0 || d % heads != 0 {
        return Err(Error::Config(format!(
            "d_model {d} not divisible by {heads} heads"
        )));
    }
    let group = mask.group_ids(n)?;
    let mut allowed = vec![false; n * n];
    for i in 0..n {
        for j in 0..n {
            allowed[i * n + j] = group[i] == group[j];
        }
    }

    let dh = d / heads;
    let scale = T::from_f64(1.0 / (dh as f64).sqrt());
    let q = linear(x, &w.w_q, &w.b_q)?;
    let k = linear(x, &w.w_k, &w.b_k)?;
    let v = linear(x, &w.w_v, &w.b_v)?;

    let mut ctx = DenseTensor::zeros(vec![n, d]);
    for h in 0..heads {
        let qh = extract_cols(&q, h * dh, dh);
        let kh = extract_cols(&k, h * dh, dh);
        let vh = extract_cols(&v, h * dh, dh);
        let mut scores = matmul_nt(&qh, &kh)?;
        for_each_chunk_mut(scores.data_mut(), n, |row, r| {
            for (j, s) in r.iter_mut().enumerate() {
                *s = *s * scale;
                if !allowed[row * n + j] {
                    *s += T::MASK_NEG;
                }
            }
        });
        let probs = softmax_rows(&scores, Some(&allowed))?;
        let ctx_h = matmul(&probs, &vh)?;
        for r in 0..n {
            ctx.row_mut(r)[h * dh..(h + 1) * dh].copy_from_slice(ctx_h.row(r));
        }
    }
    linear(&ctx, &w.w_o, &w.b_o)
}

//! Compensated summation and deterministic parallel reductions.

use num_complex::Complex64;
use rayon::prelude::*;

/// Neumaier-compensated accumulator for real sums.
#[derive(Clone, Copy, Debug, Default)]
pub struct NeumaierSum {
    sum: f64,
    comp: f64,
}

impl NeumaierSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn merge(&mut self, other: &NeumaierSum) {
        self.add(other.sum);
        self.add(other.comp);
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Neumaier-compensated accumulator for complex sums.
#[derive(Clone, Copy, Debug, Default)]
pub struct ComplexSum {
    re: NeumaierSum,
    im: NeumaierSum,
}

impl ComplexSum {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn add(&mut self, v: Complex64) {
        self.re.add(v.re);
        self.im.add(v.im);
    }

    pub fn merge(&mut self, other: &ComplexSum) {
        self.re.merge(&other.re);
        self.im.merge(&other.im);
    }

    pub fn value(&self) -> Complex64 {
        Complex64::new(self.re.value(), self.im.value())
    }
}

pub fn kahan_sum<I: IntoIterator<Item = f64>>(it: I) -> f64 {
    let mut s = NeumaierSum::new();
    for v in it {
        s.add(v);
    }
    s.value()
}

pub fn kahan_sum_c<I: IntoIterator<Item = Complex64>>(it: I) -> Complex64 {
    let mut s = ComplexSum::new();
    for v in it {
        s.add(v);
    }
    s.value()
}

/// Fixed chunk length used by every parallel reduction. The partition of the
/// index range depends only on its length, so results do not depend on the
/// number of worker threads.
pub const REDUCE_CHUNK: usize = 256;

/// Sum `f(i)` for `i in 0..n` with compensated summation inside fixed-size
/// chunks and an ordered pairwise merge of the chunk results.
pub fn par_sum_c<F>(n: usize, f: F) -> Complex64
where
    F: Fn(usize) -> Complex64 + Sync,
{
    let parts: Vec<ComplexSum> = (0..n.div_ceil(REDUCE_CHUNK))
        .into_par_iter()
        .map(|c| {
            let mut acc = ComplexSum::new();
            for i in c * REDUCE_CHUNK..n.min((c + 1) * REDUCE_CHUNK) {
                acc.add(f(i));
            }
            acc
        })
        .collect();
    pairwise_merge(parts).value()
}

pub fn par_sum<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    par_sum_c(n, |i| Complex64::new(f(i), 0.0)).re
}

fn pairwise_merge(mut parts: Vec<ComplexSum>) -> ComplexSum {
    if parts.is_empty() {
        return ComplexSum::new();
    }
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                a.merge(&b);
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop().unwrap()
}

/// Run `f` on a dedicated pool with `workers` threads (0 means the global pool).
pub fn with_workers<R: Send>(workers: usize, f: impl FnOnce() -> R + Send) -> R {
    if workers == 0 {
        return f();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(workers).build() {
        Ok(pool) => pool.install(f),
        Err(_) => f(),
    }
}

//! Toeplitz operators with FFT-backed products.
//!
//! An `N × N` Toeplitz matrix is stored as its `2N − 1` diagonal values,
//! indexed by the offset `col − row`. Circulant matrices are the special case
//! where offsets `m` and `m − N` carry the same value. Products go through a
//! `2N`-point circulant embedding when `N` is a power of two, and fall back
//! to the direct `O(N²)` sum otherwise.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use crate::C64;

/// In-place iterative radix-2 FFT. `data.len()` must be a power of two.
///
/// The inverse transform is unnormalized.
pub fn fft_in_place(data: &mut [C64], inverse: bool) {
    let n = data.len();
    debug_assert!(n.is_power_of_two());
    if n <= 1 {
        return;
    }
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            data.swap(i, j);
        }
    }
    let sign = if inverse { 1.0 } else { -1.0 };
    let mut len = 2;
    while len <= n {
        let half = len / 2;
        let step = sign * 2.0 * PI / len as f64;
        let twiddles: Vec<C64> = (0..half)
            .map(|k| C64::new(libm::cos(step * k as f64), libm::sin(step * k as f64)))
            .collect();
        for start in (0..n).step_by(len) {
            for k in 0..half {
                let a = data[start + k];
                let b = data[start + k + half] * twiddles[k];
                data[start + k] = a + b;
                data[start + k + half] = a - b;
            }
        }
        len <<= 1;
    }
}

#[derive(Debug, Clone)]
struct Embedding {
    forward: Vec<C64>,
    transpose: Vec<C64>,
}

/// Square Toeplitz matrix `T[row][col] = t(col − row)`.
#[derive(Debug, Clone)]
pub struct Toeplitz {
    n: usize,
    diagonals: Vec<C64>,
    embedding: Option<Embedding>,
}

impl Toeplitz {
    /// Builds the matrix from a function of the signed offset `col − row`.
    pub fn from_fn(n: usize, mut coefficient: impl FnMut(i64) -> C64) -> Self {
        assert!(n > 0, "Toeplitz matrix needs at least one row");
        let diagonals = (0..2 * n - 1)
            .map(|idx| coefficient(idx as i64 - (n as i64 - 1)))
            .collect();
        Self::from_diagonals(n, diagonals)
    }

    /// `diagonals[m + n − 1]` holds the value on offset `m`.
    pub fn from_diagonals(n: usize, diagonals: Vec<C64>) -> Self {
        assert_eq!(diagonals.len(), 2 * n - 1);
        let embedding = n.is_power_of_two().then(|| Embedding {
            forward: embed(n, &diagonals, false),
            transpose: embed(n, &diagonals, true),
        });
        Toeplitz {
            n,
            diagonals,
            embedding,
        }
    }

    /// Identity of size `n`.
    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |m| if m == 0 { C64::new(1.0, 0.0) } else { C64::new(0.0, 0.0) })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    /// Value on offset `col − row`; zero outside `|m| < n`.
    pub fn offset(&self, m: i64) -> C64 {
        let idx = m + self.n as i64 - 1;
        if idx < 0 || idx as usize >= self.diagonals.len() {
            C64::new(0.0, 0.0)
        } else {
            self.diagonals[idx as usize]
        }
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.offset(col as i64 - row as i64)
    }

    pub fn diagonals(&self) -> &[C64] {
        &self.diagonals
    }

    /// Column `col` as a dense vector.
    pub fn column(&self, col: usize) -> Vec<C64> {
        (0..self.n).map(|row| self.entry(row, col)).collect()
    }

    /// True when offsets `m` and `m − n` agree within `tol`.
    pub fn is_circulant(&self, tol: f64) -> bool {
        (1..self.n as i64).all(|m| (self.offset(m) - self.offset(m - self.n as i64)).norm() <= tol)
    }

    /// `Σ weight · T` over matrices of equal size.
    pub fn weighted_sum<'a>(terms: impl IntoIterator<Item = (C64, &'a Toeplitz)>) -> Option<Self> {
        let mut acc: Option<(usize, Vec<C64>)> = None;
        for (w, t) in terms {
            let (n, diag) = acc.get_or_insert_with(|| (t.n, vec![C64::new(0.0, 0.0); 2 * t.n - 1]));
            assert_eq!(*n, t.n, "Toeplitz sizes differ");
            for (d, v) in diag.iter_mut().zip(&t.diagonals) {
                *d += w * v;
            }
        }
        acc.map(|(n, diag)| Self::from_diagonals(n, diag))
    }

    /// `T · x`.
    pub fn apply(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.n);
        match &self.embedding {
            Some(e) => convolve(self.n, &e.forward, x),
            None => self.apply_direct(x, false),
        }
    }

    /// `Tᵀ · x` (plain transpose, no conjugation).
    pub fn apply_transpose(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.n);
        match &self.embedding {
            Some(e) => convolve(self.n, &e.transpose, x),
            None => self.apply_direct(x, true),
        }
    }

    /// `Tᴴ · x`.
    pub fn apply_hermitian(&self, x: &[C64]) -> Vec<C64> {
        let conj_x: Vec<C64> = x.iter().map(|v| v.conj()).collect();
        self.apply_transpose(&conj_x).into_iter().map(|v| v.conj()).collect()
    }

    fn apply_direct(&self, x: &[C64], transpose: bool) -> Vec<C64> {
        (0..self.n)
            .map(|row| {
                x.iter()
                    .enumerate()
                    .map(|(col, v)| {
                        let m = col as i64 - row as i64;
                        self.offset(if transpose { -m } else { m }) * v
                    })
                    .sum()
            })
            .collect()
    }
}

// y[r] = Σ_c t(c − r) x[c]. With x reversed this is a linear convolution of
// t with x_rev, evaluated through a 2n-point circulant.
fn embed(n: usize, diagonals: &[C64], transpose: bool) -> Vec<C64> {
    let p = 2 * n;
    let mut c = vec![C64::new(0.0, 0.0); p];
    let t = |m: i64| {
        let m = if transpose { -m } else { m };
        diagonals[(m + n as i64 - 1) as usize]
    };
    for j in 0..n as i64 {
        c[j as usize] = t(j);
        if j > 0 {
            c[p - j as usize] = t(-j);
        }
    }
    fft_in_place(&mut c, false);
    c
}

fn convolve(n: usize, spectrum: &[C64], x: &[C64]) -> Vec<C64> {
    let p = spectrum.len();
    let mut buf = vec![C64::new(0.0, 0.0); p];
    for (j, v) in x.iter().rev().enumerate() {
        buf[j] = *v;
    }
    fft_in_place(&mut buf, false);
    for (b, s) in buf.iter_mut().zip(spectrum) {
        *b *= s;
    }
    fft_in_place(&mut buf, true);
    let scale = 1.0 / p as f64;
    (0..n).map(|r| buf[n - 1 - r] * scale).collect()
}

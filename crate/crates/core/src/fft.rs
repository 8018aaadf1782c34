//! Minimal discrete Fourier transform for the grid sizes used here.
//!
//! Power-of-two lengths use an iterative radix-2 Cooley-Tukey transform;
//! other lengths fall back to the direct `O(n²)` sum. Both directions are
//! unnormalised: `forward` uses `e^{-2πi jk/n}`, `inverse` uses
//! `e^{+2πi jk/n}`.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)]
use num_traits::Float;

#[derive(Debug, Clone)]
pub struct FftPlan {
    n: usize,
    /// `e^{-2πi k/n}` for `k < n` (full table so the direct DFT can use it).
    twiddles: Vec<Complex64>,
    bit_reverse: Vec<usize>,
}

impl FftPlan {
    pub fn new(n: usize) -> Self {
        let twiddles = (0..n)
            .map(|k| {
                let angle = -2.0 * PI * k as f64 / n as f64;
                Complex64::new(angle.cos(), angle.sin())
            })
            .collect();
        let bit_reverse = if n.is_power_of_two() {
            let bits = n.trailing_zeros();
            (0..n)
                .map(|i| if bits == 0 { 0 } else { i.reverse_bits() >> (usize::BITS - bits) })
                .collect()
        } else {
            Vec::new()
        };
        Self { n, twiddles, bit_reverse }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn forward(&self, data: &mut [Complex64]) {
        self.transform(data, false);
    }

    pub fn inverse(&self, data: &mut [Complex64]) {
        self.transform(data, true);
    }

    fn transform(&self, data: &mut [Complex64], inverse: bool) {
        assert_eq!(data.len(), self.n, "FFT length mismatch");
        if self.n <= 1 {
            return;
        }
        if self.bit_reverse.is_empty() {
            self.direct(data, inverse);
            return;
        }
        for i in 0..self.n {
            let j = self.bit_reverse[i];
            if i < j {
                data.swap(i, j);
            }
        }
        let mut len = 2;
        while len <= self.n {
            let half = len / 2;
            let stride = self.n / len;
            for start in (0..self.n).step_by(len) {
                for k in 0..half {
                    let mut w = self.twiddles[k * stride];
                    if inverse {
                        w = w.conj();
                    }
                    let a = data[start + k];
                    let b = data[start + k + half] * w;
                    data[start + k] = a + b;
                    data[start + k + half] = a - b;
                }
            }
            len <<= 1;
        }
    }

    fn direct(&self, data: &mut [Complex64], inverse: bool) {
        let n = self.n;
        let out: Vec<Complex64> = (0..n)
            .map(|k| {
                let mut acc = Complex64::new(0.0, 0.0);
                for (j, x) in data.iter().enumerate() {
                    let mut w = self.twiddles[(j * k) % n];
                    if inverse {
                        w = w.conj();
                    }
                    acc += x * w;
                }
                acc
            })
            .collect();
        data.copy_from_slice(&out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rustfft::FftPlanner;

    fn signal(n: usize) -> Vec<Complex64> {
        (0..n)
            .map(|i| {
                let x = i as f64;
                Complex64::new((0.3 * x).sin() + 0.1 * x, (1.7 * x).cos() - 0.05 * x * x / n as f64)
            })
            .collect()
    }

    fn compare_with_rustfft(n: usize) {
        let plan = FftPlan::new(n);
        let mut ours = signal(n);
        let mut reference = ours.clone();
        plan.forward(&mut ours);
        FftPlanner::new().plan_fft_forward(n).process(&mut reference);
        let scale = reference.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for (a, b) in ours.iter().zip(&reference) {
            assert!((a - b).norm() < 1e-11 * scale, "n = {n}");
        }
        let mut ours = signal(n);
        let mut reference = ours.clone();
        plan.inverse(&mut ours);
        FftPlanner::new().plan_fft_inverse(n).process(&mut reference);
        for (a, b) in ours.iter().zip(&reference) {
            assert!((a - b).norm() < 1e-11 * scale, "n = {n}");
        }
    }

    #[test]
    fn radix2_matches_rustfft() {
        for n in [2, 8, 64, 1024, 4096] {
            compare_with_rustfft(n);
        }
    }

    #[test]
    fn direct_dft_matches_rustfft() {
        for n in [6, 66, 100] {
            compare_with_rustfft(n);
        }
    }

    #[test]
    fn forward_then_inverse_is_identity_times_n() {
        let n = 512;
        let plan = FftPlan::new(n);
        let original = signal(n);
        let mut data = original.clone();
        plan.forward(&mut data);
        plan.inverse(&mut data);
        for (a, b) in data.iter().zip(&original) {
            assert!((a / n as f64 - b).norm() < 1e-12);
        }
    }
}

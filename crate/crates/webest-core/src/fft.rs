//! Thin FFT helpers: cached plans and full linear convolution.

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use std::cell::RefCell;
use std::sync::Arc;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan_forward(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_forward(len))
}

fn plan_inverse(len: usize) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| p.borrow_mut().plan_fft_inverse(len))
}

/// Full linear convolution `out[s] = sum_j a[j] b[s-j]`, length `a.len() + b.len() - 1`.
///
/// Power-of-two zero-padded FFT; plans are cached per thread.
pub fn conv_full(a: &[Complex64], b: &[Complex64]) -> Vec<Complex64> {
    let out_len = a.len() + b.len() - 1;
    let fft_len = out_len.next_power_of_two();
    let fwd = plan_forward(fft_len);
    let inv = plan_inverse(fft_len);

    let mut fa = vec![Complex64::default(); fft_len];
    fa[..a.len()].copy_from_slice(a);
    let mut fb = vec![Complex64::default(); fft_len];
    fb[..b.len()].copy_from_slice(b);

    fwd.process(&mut fa);
    fwd.process(&mut fb);
    let scale = 1.0 / fft_len as f64;
    for (x, y) in fa.iter_mut().zip(fb.iter()) {
        *x *= y * scale;
    }
    inv.process(&mut fa);
    fa.truncate(out_len);
    fa
}

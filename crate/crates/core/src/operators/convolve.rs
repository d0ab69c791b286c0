use std::cell::RefCell;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::lattice::LatticeFunction;
use crate::measures::PointMassMeasure;

/// How a convolution is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub enum ConvolveMode {
    /// Sum over all (atom, site) pairs.
    Direct,
    /// Zero-padded power-of-two FFT.
    Fft,
    /// Convolve the measure with the first difference of `f`, then take a
    /// running sum. Cheap when `f` is piecewise constant.
    Differenced,
    /// Direct below [`DIRECT_THRESHOLD`] pair operations, otherwise the
    /// cheapest of the three by operation count.
    #[default]
    Auto,
}

/// Pair-operation count below which `Auto` always convolves directly.
pub const DIRECT_THRESHOLD: usize = 1 << 22;

/// Largest FFT length accepted before reporting [`Error::FftTooLarge`].
pub const MAX_FFT_LEN: usize = 1 << 27;

/// Output spans above this use a sorted sparse accumulator instead of a
/// dense buffer.
const DENSE_SPAN_LIMIT: usize = 1 << 26;

/// Relative size below which FFT and differenced outputs are treated as
/// round-off and dropped.
const NOISE_FLOOR: f64 = 1e-13;

pub fn convolve(
    m: &PointMassMeasure,
    f: &LatticeFunction,
    mode: ConvolveMode,
) -> Result<LatticeFunction> {
    if m.is_empty() || f.is_empty() {
        return Ok(LatticeFunction::zero());
    }
    match mode {
        ConvolveMode::Direct => Ok(direct(m, f)),
        ConvolveMode::Fft => fft(m, f),
        ConvolveMode::Differenced => Ok(differenced(m, f)),
        ConvolveMode::Auto => {
            let pairs = m.len().saturating_mul(f.len());
            if pairs < DIRECT_THRESHOLD {
                return Ok(direct(m, f));
            }
            let diff = difference(f);
            let span = output_span(m, f);
            let diff_cost = m.len().saturating_mul(diff.len()).saturating_add(span);
            let fft_len = span.next_power_of_two();
            let fft_cost = 6 * fft_len * fft_len.trailing_zeros() as usize;
            if pairs <= diff_cost && pairs <= fft_cost {
                Ok(direct(m, f))
            } else if diff_cost <= fft_cost || fft_len > MAX_FFT_LEN {
                Ok(differenced_with(m, f, &diff))
            } else {
                fft(m, f)
            }
        }
    }
}

fn output_span(m: &PointMassMeasure, f: &LatticeFunction) -> usize {
    let a = m.support_hull().unwrap();
    let b = f.support_hull().unwrap();
    (a.len() + b.len() - 1) as usize
}

/// Exact pairwise accumulation; atoms in the outer loop, sites inner.
fn direct(m: &PointMassMeasure, f: &LatticeFunction) -> LatticeFunction {
    let lo = m.sites()[0] + f.sites()[0];
    let span = output_span(m, f);
    if span <= DENSE_SPAN_LIMIT {
        let mut buf = vec![0.0; span];
        for (s, w) in m.iter() {
            let off = s - lo;
            for (x, v) in f.iter() {
                buf[(x + off) as usize] += w * v;
            }
        }
        return LatticeFunction::from_dense(lo, &buf);
    }
    // The stable sort keeps the (atom, site) order within each output site.
    let mut pairs = Vec::with_capacity(m.len() * f.len());
    for (s, w) in m.iter() {
        pairs.extend(f.iter().map(|(x, v)| (x + s, w * v)));
    }
    LatticeFunction::from_pairs(pairs)
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plans(len: usize) -> (Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        (p.plan_fft_forward(len), p.plan_fft_inverse(len))
    })
}

/// Both real sequences are packed into one complex buffer, so a single
/// forward transform serves for the two spectra.
fn fft(m: &PointMassMeasure, f: &LatticeFunction) -> Result<LatticeFunction> {
    let span = output_span(m, f);
    let len = span.next_power_of_two().max(2);
    if len > MAX_FFT_LEN {
        return Err(Error::FftTooLarge(len));
    }
    let (m0, f0) = (m.sites()[0], f.sites()[0]);
    let mut buf = vec![Complex64::new(0.0, 0.0); len];
    for (s, w) in m.iter() {
        buf[(s - m0) as usize].re = w;
    }
    for (x, v) in f.iter() {
        buf[(x - f0) as usize].im = v;
    }
    let (forward, inverse) = plans(len);
    forward.process(&mut buf);

    // With z = a + i b: A(k) B(k) = (Z(k)^2 - conj(Z(-k))^2) / 4i.
    let mut prod = vec![Complex64::new(0.0, 0.0); len];
    for k in 0..len {
        let z = buf[k];
        let zr = buf[(len - k) % len].conj();
        prod[k] = (z * z - zr * zr) / Complex64::new(0.0, 4.0);
    }
    inverse.process(&mut prod);

    let scale = 1.0 / len as f64;
    let floor = NOISE_FLOOR * m.total_variation() * f.sup_norm();
    let lo = m0 + f0;
    Ok(LatticeFunction::from_sorted_unchecked(
        prod[..span]
            .iter()
            .enumerate()
            .map(|(i, c)| (lo + i as i64, c.re * scale))
            .filter(|p| p.1.abs() > floor),
    ))
}

/// `x -> f(x) - f(x - 1)`.
fn difference(f: &LatticeFunction) -> LatticeFunction {
    let mut out = Vec::with_capacity(2 * f.len());
    let mut prev: Option<(i64, f64)> = None;
    for (x, v) in f.iter() {
        match prev {
            Some((p, pv)) if p + 1 == x => out.push((x, v - pv)),
            Some((p, pv)) => {
                out.push((p + 1, -pv));
                out.push((x, v));
            }
            None => out.push((x, v)),
        }
        prev = Some((x, v));
    }
    if let Some((p, pv)) = prev {
        out.push((p + 1, -pv));
    }
    LatticeFunction::from_sorted_unchecked(out)
}

fn differenced(m: &PointMassMeasure, f: &LatticeFunction) -> LatticeFunction {
    differenced_with(m, f, &difference(f))
}

fn differenced_with(
    m: &PointMassMeasure,
    f: &LatticeFunction,
    diff: &LatticeFunction,
) -> LatticeFunction {
    let lo = m.sites()[0] + f.sites()[0];
    let span = output_span(m, f);
    let steps = direct(m, diff);
    let floor = NOISE_FLOOR * m.total_variation() * diff.l1_norm();
    let mut out = Vec::new();
    let mut running = 0.0;
    let mut k = 0;
    let (sites, values) = (steps.sites(), steps.values());
    for x in lo..lo + span as i64 {
        while k < sites.len() && sites[k] <= x {
            running += values[k];
            k += 1;
        }
        if running.abs() > floor {
            out.push((x, running));
        }
    }
    LatticeFunction::from_sorted_unchecked(out)
}

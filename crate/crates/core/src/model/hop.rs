//! Clique statistics and the concave lower-envelope clique potential.
//!
//! A clique of `M` cells with `m` visible cells is mapped to the standard
//! size `K` at `t = m·K/M`. Its statistic spreads unit mass over the two
//! bins around `t`, so `w · θ` is the piecewise-linear interpolation of the
//! `K+1` envelope weights at `t`. The potential is the minimum of the `K`
//! lines through consecutive weight pairs, which equals that interpolation
//! whenever the weights are concave.

use crate::scalar::Scalar;

/// Statistic of a clique of `clique_size` cells of which `visible` are 1,
/// normalized to `k` bins plus one.
pub fn clique_stats<T: Scalar>(visible: usize, clique_size: usize, k: usize) -> Vec<T> {
    assert!(clique_size >= 1 && visible <= clique_size);
    let mut theta = vec![T::zero(); k + 1];
    let scaled = visible * k;
    let lo = scaled / clique_size;
    let rem = scaled % clique_size;
    if rem == 0 {
        theta[lo] = T::one();
    } else {
        let frac = T::of_usize(rem) / T::of_usize(clique_size);
        theta[lo] = T::one() - frac;
        theta[lo + 1] = frac;
    }
    theta
}

/// Second differences `w[j-1] - 2 w[j] + w[j+1]` for `j = 1..K`; all `<= 0` for a concave envelope.
pub fn second_differences<T: Scalar>(w_hop: &[T]) -> Vec<T> {
    w_hop.windows(3).map(|s| s[0] - (s[1] + s[1]) + s[2]).collect()
}

pub fn is_concave<T: Scalar>(w_hop: &[T], tol: T) -> bool {
    second_differences(w_hop).iter().all(|&d| d <= tol)
}

/// Lower envelope of `K` lines in the raw visible count of a clique of size `M`.
#[derive(Clone, Debug, PartialEq)]
pub struct HopEnvelope<T> {
    /// Slope per visible cell of line `k = 1..K`.
    pub slopes: Vec<T>,
    pub intercepts: Vec<T>,
    pub clique_size: usize,
    concave: bool,
}

impl<T: Scalar> HopEnvelope<T> {
    /// Line `k` runs through `(k-1, w[k-1])` and `(k, w[k])` in standard
    /// coordinates `t = m·K/M`; in raw counts its slope is `(w[k] - w[k-1])·K/M`.
    pub fn new(w_hop: &[T], clique_size: usize) -> Self {
        let k = w_hop.len() - 1;
        assert!(k >= 2 && clique_size >= 1);
        let ratio = T::of_usize(k) / T::of_usize(clique_size);
        let mut slopes = Vec::with_capacity(k);
        let mut intercepts = Vec::with_capacity(k);
        for j in 1..=k {
            let step = w_hop[j] - w_hop[j - 1];
            slopes.push(step * ratio);
            intercepts.push(w_hop[j] - step * T::of_usize(j));
        }
        let concave = is_concave(w_hop, T::zero());
        if !concave {
            log::debug!("non-concave clique weights: envelope is not graph-representable");
        }
        Self {
            slopes,
            intercepts,
            clique_size,
            concave,
        }
    }

    pub fn is_concave(&self) -> bool {
        self.concave
    }

    pub fn eval(&self, visible: usize) -> T {
        let m = T::of_usize(visible);
        self.slopes
            .iter()
            .zip(&self.intercepts)
            .map(|(&s, &b)| s * m + b)
            .fold(T::infinity(), T::min)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn stats_interpolate_between_bins() {
        assert_eq!(clique_stats::<f64>(4, 8, 4), vec![0.0, 0.0, 1.0, 0.0, 0.0]);
        let t = clique_stats::<f64>(1, 3, 4);
        let expect = [0.0, 2.0 / 3.0, 1.0 / 3.0, 0.0, 0.0];
        for (a, b) in t.iter().zip(expect) {
            assert!((a - b).abs() < 1e-15);
        }
        for m in 0..=4 {
            let mut e = vec![0.0; 5];
            e[m] = 1.0;
            assert_eq!(clique_stats::<f64>(m, 4, 4), e);
        }
    }

    #[test]
    fn envelope_reproduces_weights_at_standard_size() {
        let w = [0.0, 1.0, 1.5, 1.5, 1.0];
        let env = HopEnvelope::new(&w, 4);
        assert!(env.is_concave());
        assert_eq!(env.eval(0), 0.0);
        assert_eq!(env.eval(2), 1.5);
        assert_eq!(env.eval(4), 1.0);
        for m in 0..=4 {
            assert_eq!(env.eval(m), w[m]);
        }
    }

    #[test]
    fn zero_weights_give_zero_potential() {
        let env = HopEnvelope::new(&[0.0f64; 5], 7);
        assert!((0..=7).all(|m| env.eval(m) == 0.0));
    }

    #[test]
    fn saturating_weights_rise_then_flatten() {
        let c = 2.5f64;
        let env = HopEnvelope::new(&[0.0, c, c, c, c], 8);
        assert_eq!(env.eval(0), 0.0);
        assert!((env.eval(1) - c / 2.0).abs() < 1e-12);
        for m in 2..=8 {
            assert!((env.eval(m) - c).abs() < 1e-12);
        }
    }

    #[test]
    fn non_concave_weights_are_reported() {
        let env = HopEnvelope::new(&[0.0, 0.0, 1.0, 0.0, 0.0], 4);
        assert!(!env.is_concave());
        assert!(!is_concave(&[0.0, -1.0, 0.0], 0.0));
    }

    fn concave_weights(k: usize) -> impl Strategy<Value = Vec<f64>> {
        (
            -3.0..3.0f64,
            -2.0..2.0f64,
            proptest::collection::vec(0.0..1.5f64, k - 1),
        )
            .prop_map(|(w0, first, drops)| {
                let mut w = vec![w0];
                let mut step = first;
                w.push(w0 + step);
                for d in drops {
                    step -= d;
                    let last = *w.last().unwrap();
                    w.push(last + step);
                }
                w
            })
    }

    proptest! {
        #[test]
        fn stats_sum_to_one(m in 0usize..20, extra in 0usize..20, k in 2usize..8) {
            let size = (m + extra).max(1);
            let m = m.min(size);
            let s: f64 = clique_stats::<f64>(m, size, k).iter().sum();
            prop_assert!((s - 1.0).abs() < 1e-12);
        }

        #[test]
        fn concave_envelope_equals_interpolated_statistic(w in concave_weights(4), size in 1usize..12, m in 0usize..12) {
            let m = m.min(size);
            let env = HopEnvelope::new(&w, size);
            let theta = clique_stats::<f64>(m, size, 4);
            let interp: f64 = w.iter().zip(&theta).map(|(a, b)| a * b).sum();
            prop_assert!((env.eval(m) - interp).abs() <= 1e-9 * (1.0 + interp.abs()));
        }
    }
}

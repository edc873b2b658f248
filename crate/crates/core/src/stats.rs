//! Small numeric helpers shared by the estimators and tests.

use statrs::distribution::{ContinuousCDF, Normal};

/// Consistency constant turning a MAD into a normal-theory SD.
pub const MAD_SCALE: f64 = 1.482_602_218_505_602;

pub fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Median; reorders the scratch slice.
pub fn median_mut(v: &mut [f64]) -> f64 {
    let n = v.len();
    assert!(n > 0, "median of empty slice");
    let mid = n / 2;
    let (_, &mut hi, _) = v.select_nth_unstable_by(mid, f64::total_cmp);
    if n % 2 == 1 {
        hi
    } else {
        let lo = v[..mid].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lo + hi)
    }
}

pub fn median(v: &[f64]) -> f64 {
    let mut s = v.to_vec();
    median_mut(&mut s)
}

/// Median absolute deviation about the median, scaled to be consistent for
/// the normal SD.
pub fn mad(v: &[f64]) -> f64 {
    let m = median(v);
    let mut dev: Vec<f64> = v.iter().map(|x| (x - m).abs()).collect();
    MAD_SCALE * median_mut(&mut dev)
}

/// Mean absolute deviation about the median.
pub fn mean_abs_dev(v: &[f64]) -> f64 {
    let m = median(v);
    v.iter().map(|x| (x - m).abs()).sum::<f64>() / v.len() as f64
}

/// Type-7 (linear interpolation) quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of empty slice");
    if n == 1 {
        return sorted[0];
    }
    let h = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = (lo + 1).min(n - 1);
    let frac = h - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

pub fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("standard normal")
}

pub fn norm_cdf(z: f64) -> f64 {
    std_normal().cdf(z)
}

pub fn norm_quantile(p: f64) -> f64 {
    std_normal().inverse_cdf(p)
}

/// CDF of the chi-square distribution with two degrees of freedom.
pub fn chi2_2_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        -(-0.5 * x).exp_m1()
    }
}

/// Upper tail of chi-square(2).
pub fn chi2_2_sf(x: f64) -> f64 {
    if x <= 0.0 {
        1.0
    } else {
        (-0.5 * x).exp()
    }
}

pub fn chi2_2_quantile(p: f64) -> f64 {
    -2.0 * (-p).ln_1p()
}

/// CDF of chi-square(4), used by the MCD consistency factor.
pub fn chi2_4_cdf(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        1.0 - (-0.5 * x).exp() * (1.0 + 0.5 * x)
    }
}

/// Population SD (divisor n - 1).
pub fn sd(v: &[f64]) -> f64 {
    let m = mean(v);
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() as f64 - 1.0)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::ChiSquared;

    #[test]
    fn median_even_and_odd() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 3.0, 2.0]), 2.5);
    }

    #[test]
    fn type7_quantile_hand_values() {
        let v: Vec<f64> = (1..=999).map(f64::from).collect();
        assert!((quantile_sorted(&v, 0.025) - 25.95).abs() < 1e-9);
        assert!((quantile_sorted(&v, 0.975) - 974.05).abs() < 1e-9);
    }

    #[test]
    fn chi2_closed_forms_match_gamma_route() {
        let c2 = ChiSquared::new(2.0).unwrap();
        let c4 = ChiSquared::new(4.0).unwrap();
        for &x in &[0.01, 0.5, 1.0, 3.2, 5.991, 12.0] {
            assert!((chi2_2_cdf(x) - c2.cdf(x)).abs() < 1e-12);
            assert!((chi2_4_cdf(x) - c4.cdf(x)).abs() < 1e-12);
        }
        for &p in &[0.01, 0.5, 0.95, 0.99] {
            assert!((chi2_2_quantile(p) - c2.inverse_cdf(p)).abs() < 1e-8);
        }
        // Published table value.
        assert!((chi2_2_quantile(0.95) - 5.991).abs() < 1e-3);
    }

    #[test]
    fn mad_of_normal_like_data() {
        let v = [1.0, 2.0, 3.0, 4.0, 100.0];
        assert!((mad(&v) - MAD_SCALE).abs() < 1e-12);
    }
}

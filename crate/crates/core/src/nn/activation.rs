use alloc::vec::Vec;

/// Logistic function, evaluated without overflow for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + libm::exp(-x))
    } else {
        let e = libm::exp(x);
        e / (1.0 + e)
    }
}

pub fn sigmoid_vec(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| sigmoid(*x)).collect()
}

pub fn tanh_vec(v: &[f64]) -> Vec<f64> {
    v.iter().map(|x| libm::tanh(*x)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_values() {
        assert_eq!(sigmoid(0.0), 0.5);
        assert_eq!(libm::tanh(0.0), 0.0);
        assert!((sigmoid(2.0) - 0.880_797_077_977_882_3).abs() < 1e-15);
        assert!((sigmoid(-2.0) - (1.0 - 0.880_797_077_977_882_3)).abs() < 1e-15);
        assert_eq!(sigmoid(-1000.0), 0.0);
        assert_eq!(sigmoid(1000.0), 1.0);
        assert_eq!(sigmoid_vec(&[0.0, 0.0]), [0.5, 0.5]);
        let t = tanh_vec(&[-30.0, 1.0]);
        assert!(t[0] >= -1.0 && t[0] <= -1.0 + 1e-12);
        assert!((t[1] - 0.761_594_155_955_764_9).abs() < 1e-15);
    }
}

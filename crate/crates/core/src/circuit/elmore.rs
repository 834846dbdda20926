use super::{CrossbarConfig, Termination};

/// Wire segments on the worst-case driver → cell → ADC path: a full wordline
/// plus a full bitline single-sided, half of that double-sided.
pub fn path_segments(config: &CrossbarConfig) -> usize {
    match config.termination {
        Termination::SingleSided => 2 * config.n,
        Termination::DoubleSided => config.n,
    }
}

/// Elmore delay of a uniform distributed RC ladder of `segments` sections:
/// `Σ_{k=1..L} r·(L−k+1)·c = r·c·L(L+1)/2`.
pub fn ladder_delay(r_seg: f64, c_seg: f64, segments: usize) -> f64 {
    let l = segments as f64;
    r_seg * c_seg * l * (l + 1.0) / 2.0
}

/// Elmore delay (s) of the worst-case signal path.
///
/// The cell's own resistance sits outside the wire ladder, so it does not
/// enter the estimate; the result is quadratic in the array dimension.
pub fn elmore_delay(config: &CrossbarConfig) -> f64 {
    ladder_delay(config.r_seg, config.c_seg, path_segments(config))
}

/// Settling-limited clock `1 / (k_settle · delay)`; `f64::INFINITY` when the
/// wires carry no RC delay.
pub fn max_frequency(config: &CrossbarConfig, k_settle: f64) -> f64 {
    let delay = elmore_delay(config);
    if delay > 0.0 {
        1.0 / (k_settle * delay)
    } else {
        f64::INFINITY
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_form_examples() {
        assert_eq!(ladder_delay(2.0, 3e-15, 1), 6e-15);
        // Hand sum 10+9+...+1 = 55.
        let hand: f64 = (1..=10).map(|k| (10 - k + 1) as f64).sum();
        assert_eq!(hand, 55.0);
        assert!((ladder_delay(1.0, 1e-15, 10) - 55e-15).abs() < 1e-28);
    }

    #[test]
    fn doubling_size_quarters_frequency() {
        for n in [64, 128, 256] {
            let a = CrossbarConfig::new(n);
            let b = CrossbarConfig::new(2 * n);
            let ratio = elmore_delay(&b) / elmore_delay(&a);
            assert!((3.9..=4.1).contains(&ratio), "{ratio}");
            let fr = max_frequency(&a, 7.0) / max_frequency(&b, 7.0);
            assert!((3.9..=4.1).contains(&fr));
        }
    }

    #[test]
    fn frequency_limit_examples() {
        // k_settle = 7 and a 1 ns delay: 1/(7 ns) ≈ 142.857 MHz.
        let cfg = CrossbarConfig {
            c_seg: 1e-9 / ladder_delay(1.0, 1.0, 2),
            r_seg: 1.0,
            ..CrossbarConfig::new(1)
        };
        assert!((elmore_delay(&cfg) - 1e-9).abs() < 1e-24);
        assert!((max_frequency(&cfg, 7.0) - 142.857_142_857e6).abs() < 1.0);

        let free = CrossbarConfig {
            c_seg: 0.0,
            ..CrossbarConfig::new(16)
        };
        assert_eq!(max_frequency(&free, 7.0), f64::INFINITY);

        let mut prev = f64::INFINITY;
        for n in 1..50 {
            let f = max_frequency(&CrossbarConfig::new(n), 7.0);
            assert!(f < prev);
            prev = f;
        }
    }
}

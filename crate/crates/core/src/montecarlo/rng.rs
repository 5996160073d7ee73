//! Counter-based random numbers: every draw is a pure function of
//! (seed, stream, gate, draw index), so gates can be simulated in any order.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Key for one independent stream of a run.
#[inline]
pub fn stream_key(seed: u64, stream: u64) -> u64 {
    mix64(seed ^ mix64(stream.wrapping_add(GOLDEN)))
}

pub const DRAWS_PER_GATE: u64 = 16;

/// Uniform in [0, 1) with 53 random bits.
#[inline]
pub fn uniform(key: u64, gate: u64, draw: u64) -> f64 {
    let counter = gate.wrapping_mul(DRAWS_PER_GATE).wrapping_add(draw);
    let bits = mix64(key.wrapping_add(counter.wrapping_add(1).wrapping_mul(GOLDEN)));
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniforms_have_expected_moments() {
        let key = stream_key(42, 3);
        let n = 200_000u64;
        let (mut s, mut s2) = (0.0, 0.0);
        for g in 0..n {
            let u = uniform(key, g, 0);
            assert!((0.0..1.0).contains(&u));
            s += u;
            s2 += u * u;
        }
        let mean = s / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!((mean - 0.5).abs() < 4.0 * (1.0 / 12.0 / n as f64).sqrt());
        assert!((var - 1.0 / 12.0).abs() < 1e-3);
    }

    #[test]
    fn streams_and_draws_differ() {
        let a = stream_key(1, 0);
        let b = stream_key(1, 1);
        assert_ne!(uniform(a, 5, 0), uniform(b, 5, 0));
        assert_ne!(uniform(a, 5, 0), uniform(a, 5, 1));
        assert_ne!(uniform(a, 5, 0), uniform(a, 6, 0));
        assert_eq!(uniform(a, 5, 0), uniform(stream_key(1, 0), 5, 0));
    }

    #[test]
    fn neighbouring_gates_uncorrelated() {
        let key = stream_key(7, 9);
        let n = 100_000u64;
        let mut acc = 0.0;
        for g in 0..n {
            acc += (uniform(key, g, 0) - 0.5) * (uniform(key, g + 1, 0) - 0.5);
        }
        let corr = acc / n as f64 * 12.0;
        assert!(corr.abs() < 4.0 / (n as f64).sqrt(), "{corr}");
    }
}

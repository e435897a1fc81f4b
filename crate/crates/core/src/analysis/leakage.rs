//! Inter-carrier leakage under a frequency offset.

use std::f64::consts::PI;

use crate::layout::CarrierLayout;

use super::special::composite_rule;

/// Power a unit carrier leaks into a bin `k + delta` carriers away:
/// `sinc^2(pi (k + delta))`, equal to 1 at zero distance.
pub fn leakage_single(k: f64, delta: f64) -> f64 {
    let x = k + delta;
    if x == 0.0 {
        return 1.0;
    }
    if x.fract() == 0.0 {
        return 0.0;
    }
    let s = (PI * x).sin() / (PI * x);
    s * s
}

/// Upper bound on the power leaked into all bins at distance `k` or more:
/// `pi^2 / 6 - sum_{c < k} 1 / c^2`.
pub fn leakage_block(k: u32) -> f64 {
    let partial: f64 = (1..k).map(|c| 1.0 / (c as f64 * c as f64)).sum();
    PI * PI / 6.0 - partial
}

/// Fraction of a tag's power that lands outside its own codeword mask,
/// averaged over a frequency offset uniform on `(0, max_offset)`.
///
/// Each energised thin carrier spreads `sinc^2` power over every bin of the
/// (periodic) transform. A bin counts as leaked in proportion to the chance
/// that its wide carrier is inactive in a random tag: never for the carrier
/// itself, always for its group partner and for nulls, and half the time
/// for carriers of other groups.
pub fn expected_offset_leak(max_offset: f64, layout: &CarrierLayout) -> f64 {
    if max_offset <= 0.0 {
        return 0.0;
    }
    let panels = (max_offset * 4.0).ceil().max(1.0) as usize;
    composite_rule(0.0, max_offset, panels, 8)
        .iter()
        .map(|(delta, w)| w * leak_at(*delta, layout))
        .sum::<f64>()
        / max_offset
}

/// Leaked fraction at a fixed offset, averaged over every carrier a tag can
/// energise.
pub fn leak_at(delta: f64, layout: &CarrierLayout) -> f64 {
    let n = layout.fft_size as isize;
    let mut partner = vec![usize::MAX; layout.wide_total];
    for (a, b) in layout.group_map() {
        partner[a] = b;
        partner[b] = a;
    }
    let inactive: Vec<Vec<f64>> = (0..layout.wide_total)
        .map(|own| {
            (0..layout.wide_total)
                .map(|w| {
                    if w == own {
                        0.0
                    } else if w == partner[own] || layout.is_null(w) {
                        1.0
                    } else {
                        0.5
                    }
                })
                .collect()
        })
        .collect();
    // kernel[d]: power reaching a bin d places above the source, images included
    let kernel: Vec<f64> = (0..n)
        .map(|d| (-2..=2).map(|m| leakage_single((d + m * n) as f64, -delta)).sum())
        .collect();
    let bin_wide: Vec<usize> = (0..layout.fft_size).map(|b| layout.wide_of_bin(b)).collect();
    let mut total = 0.0;
    let mut count = 0usize;
    for own in layout.data_wide() {
        for offset in layout.active_offsets() {
            let src = layout.thin_bin(own, offset) as isize;
            let mut leaked = 0.0;
            for bin in 0..n {
                let d = (bin - src).rem_euclid(n) as usize;
                leaked += kernel[d] * inactive[own][bin_wide[bin as usize]];
            }
            total += leaked;
            count += 1;
        }
    }
    total / count as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_examples() {
        assert_eq!(leakage_single(0.0, 0.0), 1.0);
        for k in 1..10 {
            assert_eq!(leakage_single(k as f64, 0.0), 0.0);
        }
        let half = (PI / 2.0).sin().powi(2) / (PI / 2.0).powi(2);
        assert!((leakage_single(0.0, 0.5) - half).abs() < 1e-15);
        assert!((half - 0.4053).abs() < 1e-4);
        for k in 1..20 {
            for &d in &[0.1, 0.3, 0.77] {
                let x = k as f64 + d;
                assert!(leakage_single(k as f64, d) <= 1.0 / (x * x));
            }
        }
    }

    #[test]
    fn block_examples() {
        assert_eq!(leakage_block(1), PI * PI / 6.0);
        assert!((leakage_block(2) - (PI * PI / 6.0 - 1.0)).abs() < 1e-15);
        let oracle = PI * PI / 6.0 - (1.0 + 0.25 + 1.0 / 9.0 + 1.0 / 16.0);
        assert!((leakage_block(5) - oracle).abs() < 1e-15);
        assert!((leakage_block(5) - 0.2213).abs() < 1e-4);
    }

    #[test]
    fn no_offset_no_leak() {
        let l = CarrierLayout::reference();
        assert!(leak_at(0.0, &l).abs() < 1e-12);
        assert_eq!(expected_offset_leak(0.0, &l), 0.0);
        assert!(expected_offset_leak(1e-3, &l) < 1e-5);
    }

    #[test]
    fn integer_offsets_stay_inside_the_guard() {
        // a one-carrier shift moves offsets 2..6 to 3..7, still in the own carrier
        let l = CarrierLayout::reference();
        assert!(leak_at(1.0, &l) < 1e-9);
        // two carriers reaches the edge but not the neighbour
        assert!(leak_at(2.0, &l) < 1e-9);
        // three carriers pushes one of four thin carriers into the next wide carrier
        assert!(leak_at(3.0, &l) > 0.1);
    }
}

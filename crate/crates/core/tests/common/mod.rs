//! Shared reference tables for integration tests.

#![allow(dead_code)]

/// Computed once with mpmath at 50 digits: `log10(erfc(z/sqrt(2)))`.
pub const LOG10_P: &[(f64, f64)] = &[
    (0.0, 0.0),
    (0.5, -0.20966199360126),
    (1.0, -0.498515545827989),
    (1.96, -1.30106656222387),
    (2.5758293, -1.99999999554273),
    (3.0, -2.56866904026539),
    (5.0, -6.24161567672667),
    (8.0, -14.9051125553532),
    (10.0, -22.8170234098221),
    (15.0, -50.1341896186115),
    (20.0, -88.2590653474116),
    (25.0, -137.213717655332),
    (30.0, -197.008179265997),
    (33.18, -240.679420103766),
    (38.0, -315.238759708299),
    (40.0, -349.135976463682),
    (45.0, -441.474649581613),
    (50.0, -544.665305866333),
    (55.0, -658.708969956643),
    (60.0, -783.606399168447),
    (66.21, -953.841361836603),
    (70.0, -1065.96472722785),
];

use hef_core::timeseries::{Dataset, Frequency, TimeSeries};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

/// Monthly demand-like series spread over four variability bands. Bands 2
/// and 3 carry positive demand spikes.
pub fn synthetic_demand(count: usize, len: usize, seed: u64) -> Dataset {
    let mut series = Vec::with_capacity(count);
    for i in 0..count {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let band = i % 4;
        let level = 50.0 + 150.0 * rng.random::<f64>();
        let (amp, noise, spike_prob) = match band {
            0 => (0.05, 0.04, 0.0),
            1 => (0.25, 0.15, 0.0),
            2 => (0.45, 0.35, 0.06),
            _ => (0.6, 0.5, 0.12),
        };
        let trend = level * 0.002 * (rng.random::<f64>() - 0.3);
        let phase = rng.random::<f64>() * std::f64::consts::TAU;
        let eps = Normal::new(0.0, noise * level).unwrap();
        let values: Vec<f64> = (0..len)
            .map(|t| {
                let season = amp * level * ((t as f64) * std::f64::consts::TAU / 12.0 + phase).sin();
                let mut v = level + trend * t as f64 + season + eps.sample(&mut rng);
                if rng.random::<f64>() < spike_prob {
                    v += level * rng.random_range(2.0..5.0);
                }
                v.max(0.0)
            })
            .collect();
        series.push(TimeSeries::new(format!("syn{i:02}"), Frequency::Monthly, values).unwrap());
    }
    Dataset::new("synthetic", series).unwrap()
}

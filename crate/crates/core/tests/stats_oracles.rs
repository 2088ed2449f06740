#![allow(clippy::approx_constant)]

//! Shapiro–Wilk reference values computed once with scipy 1.15
//! (`scipy.stats.shapiro`) and frozen here.

mod common;

use common::LOG10_P;
use hef_core::stats::{log10_two_sided_p, shapiro_wilk, two_proportion_z};

#[rustfmt::skip]
const SHAPIRO: &[(&[f64], f64, f64)] = &[
    (&[12.0577, 13.2838, 12.2934], 0.8878692618, 0.3478672955),
    (&[8.0536, 7.2144, 10.1344, 11.7227], 0.9516414292, 0.7263817338),
    (&[0.5192, 0.4343, 0.0864, 1.0208, 0.389], 0.9278801043, 0.5819872726),
    (&[7.7846, 12.9688, 10.0978, 11.623, 7.2472, 9.1273, 7.4178, 8.4486], 0.9049615950, 0.3199431218),
    (&[0.2063, 0.4427, 0.278, 0.875, 0.2132, 0.2742, 0.8072, 0.2684, 0.2681, 0.0709, 0.4672], 0.8397163184, 0.0313119070),
    (&[10.5445, 10.1136, 10.8491, 10.4499, 13.3154, 8.6726, 12.3984, 9.1948, 8.0841, 12.4224, 9.121, 9.2247], 0.9369426361, 0.4595088761),
    (&[7.2226, 5.8036, 11.2686, 7.6695, 11.5565, 13.6963, 9.7704, 7.7468, 10.7884, 11.5235, 9.4764, 10.0349, 12.6705, 12.5309, 11.42, 8.2672, 9.8926, 11.2058, 9.5763, 8.78, 8.4692], 0.9840677449, 0.9713778139),
    (&[8.736, 8.6568, 9.0978, 12.2914, 8.3987, 11.7738, 10.8352, 10.2795, 8.3452, 9.0866, 13.9471, 10.1981, 11.0764, 11.3261, 12.1113, 9.525, 8.7796, 9.8808, 9.4784, 11.5814, 10.3792], 0.9420759378, 0.2394416829),
    (&[1.1828, 0.4347, 0.3398, 0.1325, 0.7059, 0.0595, 0.682, 0.5509, 0.4509, 0.94, 0.1241, 2.3708, 0.4142, 0.0056, 0.5712, 2.4472, 0.8597, 0.8592, 1.0091, 1.1319, 0.0311], 0.8378272865, 0.0026397770),
    (&[0.9167, 0.2468, 0.4858, 0.1283, 0.3835, 0.7823, 0.2391, 0.8446, 0.6141, 0.6338, 0.9051, 0.5097, 0.1388, 0.6405, 0.6344, 0.8001, 0.1265, 0.218, 0.9326, 0.5628, 0.204], 0.9130259923, 0.0630258127),
    (&[8.4032, 10.2267, 9.9089, 11.7876, 11.0237, 9.1297, 10.2285, 4.2823, 8.4052, 9.7051, 5.2255, 9.3551, 10.5033, 12.0699, 10.8059, 13.7685, 13.0559, 6.7313, 9.5479, 9.6876, 10.1834, 8.8545, 11.2208, 11.4901, 6.9515, 11.8907, 8.7049, 12.1126, 11.1293, 9.7389, 13.9767, 11.7804, 10.0646, 10.4979, 14.8303], 0.9684347059, 0.4017154821),
    (&[0.4275, 3.2387, 0.0115, 0.1133, 3.8189, 0.1622, 0.6025, 1.7387, 3.1884, 0.0492, 0.4099, 0.3067, 1.6003, 0.4285, 0.9403, 0.8202, 1.1417, 0.7047, 1.982, 0.0294, 0.2957, 0.7492, 0.8237, 1.5761, 0.1315, 0.346, 0.5959, 0.4441, 2.3111, 0.8744, 1.7162, 1.3673, 1.4439, 2.4211, 0.9662, 0.1671, 4.2676, 1.2844, 1.9075, 0.4576, 1.3283, 1.1728, 1.9437, 0.1794, 0.2993, 2.9299, 1.8043, 1.217, 0.9914, 0.0788, 3.2969, 0.4009, 0.1251, 2.1174, 3.2901, 0.2963, 0.2785, 1.6671, 0.7841, 1.3362], 0.8853159427, 0.0000399811),
];

#[test]
fn shapiro_wilk_matches_reference() {
    for (x, w, p) in SHAPIRO {
        let r = shapiro_wilk(x, 0.05).unwrap();
        assert!((r.statistic - w).abs() < 1e-6, "n={} W {} vs {}", x.len(), r.statistic, w);
        assert!((r.p_value - p).abs() < 1e-4, "n={} p {} vs {}", x.len(), r.p_value, p);
    }
}

/// Three significant digits of p means |Δ log10 p| < log10(1.0005).
#[test]
fn tail_kernel_matches_high_precision_reference() {
    for &(z, reference) in LOG10_P {
        for signed in [z, -z] {
            let got = log10_two_sided_p(signed);
            assert!((got - reference).abs() < 2e-4, "z={signed}: {got} vs {reference}");
        }
    }
}

#[test]
fn extreme_p_does_not_underflow_early() {
    // p ≈ 1e-300 sits near z = 37.0
    let r = two_proportion_z(9000, 10_000, 1000, 10_000, 0.05).unwrap();
    assert!(r.log10_p.is_finite() && r.log10_p < -300.0);
    assert!(r.significant);
    let z = 37.0;
    let p = 10f64.powf(log10_two_sided_p(z));
    assert!(p > 0.0 && p < 1e-298, "{p}");
}

#[test]
fn antisymmetry() {
    for (x1, n1, x2, n2) in [(3, 40, 17, 55), (120, 400, 90, 410), (1, 2, 0, 3)] {
        let a = two_proportion_z(x1, n1, x2, n2, 0.05).unwrap();
        let b = two_proportion_z(x2, n2, x1, n1, 0.05).unwrap();
        assert_eq!(a.statistic, -b.statistic);
        assert_eq!(a.p_value, b.p_value);
    }
}

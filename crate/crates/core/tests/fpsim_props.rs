use mpschwarz::fpsim::{FloatFormat, RoundMode, BINARY_PRESETS};
use proptest::prelude::*;

const MODES: [RoundMode; 3] = [RoundMode::Nearest, RoundMode::TowardZero, RoundMode::AwayFromZero];

fn formats() -> Vec<FloatFormat> {
    let mut v: Vec<FloatFormat> = BINARY_PRESETS.iter().map(|n| FloatFormat::preset(n).unwrap()).collect();
    v.extend((1..=16).map(|d| FloatFormat::decimal(d).unwrap()));
    v
}

/// Magnitudes inside every binary format's normal range (q43 tops out at 240).
fn in_range() -> impl Strategy<Value = f64> {
    (-4.0f64..2.3, any::<bool>()).prop_map(|(e, neg)| {
        let x = 10f64.powf(e);
        if neg {
            -x
        } else {
            x
        }
    })
}

proptest! {
    #[test]
    fn rounding_is_idempotent(x in in_range()) {
        for f in formats() {
            for m in MODES {
                let Ok(r) = f.round(x, m) else { continue };
                prop_assert_eq!(f.round(r, m).unwrap(), r, "{} {:?}", f.name(), m);
            }
        }
    }

    #[test]
    fn directed_modes_bracket_the_value(x in in_range()) {
        for f in formats() {
            let (Ok(down), Ok(up)) = (f.round(x, RoundMode::TowardZero), f.round(x, RoundMode::AwayFromZero)) else { continue };
            prop_assert!(down.abs() <= x.abs() && up.abs() >= x.abs());
            prop_assert!(down == 0.0 || down.signum() == x.signum());
            prop_assert_eq!(up.signum(), x.signum());
        }
    }

    #[test]
    fn relative_error_law(x in in_range()) {
        for f in formats() {
            if x.abs() < f.x_min() {
                continue;
            }
            for m in MODES {
                let Ok(r) = f.round(x, m) else { continue };
                prop_assert!((r - x).abs() <= 2.0 * f.unit_roundoff() * x.abs(), "{} {:?} {} -> {}", f.name(), m, x, r);
            }
        }
    }

    #[test]
    fn finer_format_is_no_worse(x in in_range()) {
        let chain: Vec<Vec<FloatFormat>> = vec![
            ["q52", "bfloat16", "fp32", "fp64"].iter().map(|n| FloatFormat::preset(n).unwrap()).collect(),
            (1..=16).map(|d| FloatFormat::decimal(d).unwrap()).collect(),
        ];
        for fs in chain {
            for w in fs.windows(2) {
                let (Ok(coarse), Ok(fine)) = (w[0].round(x, RoundMode::Nearest), w[1].round(x, RoundMode::Nearest)) else { continue };
                prop_assert!((fine - x).abs() <= (coarse - x).abs() + 2.0 * w[1].unit_roundoff() * x.abs());
            }
        }
    }
}

#[test]
fn decimal_third_both_directions() {
    let f = FloatFormat::decimal(4).unwrap();
    let third = 1.0 / 3.0;
    assert_eq!(f.round(third, RoundMode::TowardZero).unwrap(), 0.3333);
    assert_eq!(f.round(third, RoundMode::AwayFromZero).unwrap(), 0.3334);
    assert_eq!(f.round(-third, RoundMode::AwayFromZero).unwrap(), -0.3334);
}

#[test]
fn unit_roundoff_definitions() {
    for name in BINARY_PRESETS {
        let f = FloatFormat::preset(name).unwrap();
        let t = f.significand_bits().unwrap() as i32;
        assert_eq!(f.unit_roundoff(), 2f64.powi(-t));
    }
    for d in 1..=16 {
        assert_eq!(FloatFormat::decimal(d).unwrap().unit_roundoff(), 0.5 * 10f64.powi(1 - d as i32));
    }
}

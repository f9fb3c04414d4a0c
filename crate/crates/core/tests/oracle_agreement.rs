//! The closed-form corrections against frozen outputs of the independent
//! numerical oracles. The frozen numbers were produced by the quadrature and
//! contour routines alone; regressions in either route surface here.

use hdwilks::oracle::{
    contour_mean, contour_variance, quad_lsd_integral, ContourSpec, LsdIntegrand,
};
use hdwilks::rmt::{corrections, AspectRatios};

// (y1, y2, mean, variance, log moment)
const FROZEN: [(f64, f64, f64, f64, f64); 3] = [
    (0.5, 0.25, 0.052680257824, 0.210721034869, 0.454026674723),
    (
        1.0 / 3.0,
        0.2,
        0.044806079340,
        0.179224320715,
        0.512149172361,
    ),
    (0.9, 0.9, 0.852374046109, 3.409496101992, 1.167994060040),
];

#[test]
fn closed_forms_match_frozen_oracle_values() {
    for (y1, y2, m, v, f) in FROZEN {
        let y = AspectRatios::new(y1, y2).unwrap();
        let c = corrections(y);
        assert!(
            (c.mean_m - m).abs() < 1e-9,
            "mean at ({y1}, {y2}): {} vs frozen {m}",
            c.mean_m
        );
        assert!(
            (c.var_v - v).abs() < 5e-6,
            "variance at ({y1}, {y2}): {} vs frozen {v}",
            c.var_v
        );
        assert!(
            (c.lsd_moment - f).abs() < 1e-9,
            "moment at ({y1}, {y2}): {} vs frozen {f}",
            c.lsd_moment
        );
    }
}

#[test]
fn oracles_reproduce_their_frozen_values() {
    let mean_spec = ContourSpec::mean_default();
    let var_spec = ContourSpec::variance_default();
    for (y1, y2, m, v, f) in FROZEN {
        let y = AspectRatios::new(y1, y2).unwrap();
        assert!((contour_mean(y, &mean_spec).unwrap() - m).abs() < 1e-10);
        assert!((contour_variance(y, &var_spec).unwrap() - v).abs() < 1e-10);
        assert!((quad_lsd_integral(LsdIntegrand::LogMoment, y).unwrap() - f).abs() < 1e-10);
    }
}

#[test]
fn density_mass_is_unit_on_grid() {
    for i in 1..=9 {
        for j in 1..=9 {
            let y = AspectRatios::new(i as f64 / 10.0, j as f64 / 10.0).unwrap();
            let mass = quad_lsd_integral(LsdIntegrand::One, y).unwrap();
            assert!(
                (mass - 1.0).abs() < 1e-8,
                "mass {mass} at ({i}, {j})"
            );
        }
    }
}

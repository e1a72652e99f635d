//! Bundled field fixtures used by the test suite and shipped as CLI demos.

use crate::field::{generate_skeleton, normalize, FieldSpec, NormalizedField, TransformChain};
use crate::geom::Point2;
use crate::oracle::make_rect_field;

/// Rectangle fixture pipeline: spec through normalisation.
pub fn rect_normalized(h0: f64, n: usize, w0: f64, r: f64, q_l: f64) -> NormalizedField {
    let spec = make_rect_field(h0, n, w0, r, q_l).expect("valid rectangle parameters");
    let sk = generate_skeleton(&spec).expect("rectangle skeleton");
    normalize(&spec, &sk).expect("rectangle normalises").0
}

/// Rectangle fixture with the transform chain.
pub fn rect_normalized_with_chain(
    h0: f64,
    n: usize,
    w0: f64,
    r: f64,
    q_l: f64,
) -> (NormalizedField, TransformChain) {
    let spec = make_rect_field(h0, n, w0, r, q_l).expect("valid rectangle parameters");
    let sk = generate_skeleton(&spec).expect("rectangle skeleton");
    normalize(&spec, &sk).expect("rectangle normalises")
}

/// Synthetic working-scale field: a convex hexagon of about 32.2 ha with a
/// 36 m operating width and 7 m turning radius. Stands in for a real
/// production field in trend-level comparisons; the contour is invented.
pub fn synthetic_32ha() -> FieldSpec {
    FieldSpec {
        contour: vec![
            Point2::new(0.0, 40.0),
            Point2::new(200.0, -30.0),
            Point2::new(630.0, -12.0),
            Point2::new(810.0, 125.0),
            Point2::new(745.0, 453.0),
            Point2::new(155.0, 453.0),
        ],
        entrance: Point2::new(300.0, 435.0),
        exit: None,
        theta: 0.0,
        operating_width: 36.0,
        turning_radius: 7.0,
        headland_offset: Some(18.0),
    }
}

/// Demo square field matching the CLI fixture file.
pub fn demo_square() -> FieldSpec {
    FieldSpec {
        contour: vec![
            Point2::new(0.0, 0.0),
            Point2::new(100.0, 0.0),
            Point2::new(100.0, 100.0),
            Point2::new(0.0, 100.0),
        ],
        entrance: Point2::new(30.0, 95.0),
        exit: None,
        theta: 0.0,
        operating_width: 10.0,
        turning_radius: 2.0,
        headland_offset: Some(5.0),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::signed_area;

    #[test]
    fn synthetic_field_area_is_about_32_ha() {
        let f = synthetic_32ha();
        let area = signed_area(&f.contour).abs();
        assert!((area - 322_122.5).abs() < 1.0, "area {area}");
        f.validate().unwrap();
        let sk = generate_skeleton(&f).unwrap();
        let (nf, _) = normalize(&f, &sk).unwrap();
        assert!(nf.lane_count() >= 18, "N = {}", nf.lane_count());
    }
}

//! Closed-form route-length differences on rectangular fields.
//!
//! For a rectangle with an odd lane count and the entrance between lanes 1
//! and 2, the difference between the meander's and the skip-and-fill's
//! return/resume path lengths has a closed form per network edge, and the
//! single-run plan lengths differ by simple multiples of the operating
//! width. These expressions serve as an independent check of the graph
//! planners; the test suite compares them edge by edge.
//!
//! Sign convention: `delta = meander - skip_and_fill`, so positive values
//! mean the skip-and-fill route is shorter.

use crate::field::FieldSpec;
use crate::geom::Point2;
use crate::plan::Pattern;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("outside the closed-form table's scope: {0}")]
    UnsupportedCase(String),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
}

/// Rectangle parameters for the closed forms.
#[derive(Clone, Copy, Debug)]
pub struct RectParams {
    /// Nominal lane length (m).
    pub h0: f64,
    /// Operating width / lane spacing (m).
    pub w0: f64,
    /// Turning radius (m).
    pub r: f64,
    /// Entrance offset from lane 1 along the upper headland (m).
    pub q_l: f64,
}

impl RectParams {
    /// Quarter-circle turn length.
    pub fn c(&self) -> f64 {
        self.r * PI / 2.0
    }

    /// Effective lane-to-lane traversal length: straight trimmed by the two
    /// turn fillets plus the two quarter circles.
    pub fn h(&self) -> f64 {
        self.h0 - 2.0 * self.r + 2.0 * self.c()
    }

    /// Straight portion of an adjacent-lane U-turn.
    pub fn w(&self) -> f64 {
        self.w0 - 2.0 * self.r
    }

    pub fn q_p(&self) -> f64 {
        self.w0 - self.q_l
    }
}

/// Network edge addressed by the node labeling of the closed forms: headland
/// edges by the index of their tail node in traversal direction, lanes by
/// index with the fraction `p` along the lane measured from the lower end
/// (as a fraction of the effective traversal length `h`).
#[derive(Clone, Copy, Debug)]
pub enum EdgeClass {
    Headland { j: usize },
    Lane { j: usize, p: f64 },
}

fn check_scope(n: usize) -> Result<(), OracleError> {
    if n % 2 == 0 {
        return Err(OracleError::UnsupportedCase(format!(
            "closed forms cover odd lane counts only (n = {n})"
        )));
    }
    if n < 5 {
        return Err(OracleError::UnsupportedCase(format!(
            "closed forms assume n >= 5 (n = {n})"
        )));
    }
    Ok(())
}

/// Return-trip difference (vehicle to depot) for an edge class.
pub fn delta_return(class: EdgeClass, n: usize, rp: &RectParams) -> Result<f64, OracleError> {
    check_scope(n)?;
    let w0 = rp.w0;
    Ok(match class {
        EdgeClass::Headland { j } => {
            if j == 0 || j == 1 || j == n + 1 || j == 2 * n + 1 {
                2.0 * (n as f64 - 3.0) * w0
            } else if j > 1 && j < n {
                if j % 2 == 0 {
                    2.0 * (n as f64 - j as f64 - 1.0) * w0
                } else {
                    2.0 * (n as f64 - j as f64 - 2.0) * w0
                }
            } else {
                0.0
            }
        }
        EdgeClass::Lane { j, p } => {
            if j == 0 || j > n {
                return Err(OracleError::UnsupportedCase(format!("no lane {j}")));
            }
            let h = rp.h();
            if j == 1 {
                2.0 * (n as f64 - 3.0) * w0
            } else if j % 2 == 0 {
                2.0 * (1.0 - p) * h + 2.0 * (n as f64 - j as f64 - 1.0) * w0 - 2.0 * rp.r
            } else {
                2.0 * p * h + 2.0 * (n as f64 - j as f64) * w0 - 2.0 * rp.r
            }
        }
    })
}

/// Resume-trip difference (depot back to the interruption point).
pub fn delta_resume(class: EdgeClass, n: usize, rp: &RectParams) -> Result<f64, OracleError> {
    check_scope(n)?;
    let w0 = rp.w0;
    Ok(match class {
        EdgeClass::Headland { j } => {
            if (3..=n).contains(&j) || j == 2 * n + 2 {
                -2.0 * rp.q_l
            } else if j == 2 * n + 1 {
                0.0
            } else if (n + 2..=2 * n).contains(&j) {
                if j % 2 == 0 {
                    -2.0 * rp.q_l + (4.0 * n as f64 - 2.0 * j as f64) * w0 - 2.0 * rp.r
                } else {
                    -2.0 * rp.q_l + (4.0 * n as f64 - 2.0 * j as f64 - 2.0) * w0 - 2.0 * rp.r
                }
            } else {
                0.0
            }
        }
        EdgeClass::Lane { j, p } => {
            if j == 0 || j > n {
                return Err(OracleError::UnsupportedCase(format!("no lane {j}")));
            }
            let h = rp.h();
            if j == 1 {
                0.0
            } else if j == 2 {
                -2.0 * (1.0 - p) * h - 2.0 * w0 + 2.0 * rp.r
            } else if j % 2 == 0 {
                -2.0 * (1.0 - p) * h - 2.0 * w0 - 2.0 * rp.q_l
            } else {
                -2.0 * p * h - 2.0 * rp.q_l
            }
        }
    })
}

/// Single-run plan-length difference `meander - method` for odd lane counts.
pub fn delta_single_run(method: Pattern, n: usize, w0: f64) -> Result<f64, OracleError> {
    if n % 2 == 0 {
        return Err(OracleError::UnsupportedCase(format!(
            "single-run closed forms cover odd lane counts only (n = {n})"
        )));
    }
    match method {
        Pattern::Circ => Ok(-((n as f64 - 1.0) * w0)),
        Pattern::CircStar => Ok((n as f64 - 3.0) * w0),
        Pattern::Abp => Ok(0.0),
    }
}

/// Rectangle test fixture: a field whose skeleton yields exactly `n` lanes
/// of length `h0` with the entrance on the upper headland `q_l` east of lane
/// 1. The far margin is one full operating width, so the single-run closed
/// forms hold exactly.
pub fn make_rect_field(
    h0: f64,
    n: usize,
    w0: f64,
    r: f64,
    q_l: f64,
) -> Result<FieldSpec, OracleError> {
    if h0 <= 0.0 || w0 <= 0.0 || r < 0.0 || n == 0 {
        return Err(OracleError::InvalidParams(
            "h0, w0 positive; r non-negative; n >= 1".into(),
        ));
    }
    if !(0.0..w0).contains(&q_l) {
        return Err(OracleError::InvalidParams(format!(
            "q_l must lie in [0, w0) ({q_l} vs {w0})"
        )));
    }
    // Headland interior width n*w0 + w0/2: lanes at w0/2 + k*w0 leave a
    // half-width margin on the near side and a full width on the far side.
    let width = n as f64 * w0 + w0 / 2.0;
    let off = w0 / 2.0;
    let contour = vec![
        Point2::new(-off, -off),
        Point2::new(width + off, -off),
        Point2::new(width + off, h0 + off),
        Point2::new(-off, h0 + off),
    ];
    let entrance = Point2::new(w0 / 2.0 + q_l, h0);
    Ok(FieldSpec {
        contour,
        entrance,
        exit: None,
        theta: 0.0,
        operating_width: w0,
        turning_radius: r,
        headland_offset: Some(off),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{generate_skeleton, normalize, EntranceClass};

    fn rp() -> RectParams {
        RectParams {
            h0: 500.0,
            w0: 36.0,
            r: 7.0,
            q_l: 10.0,
        }
    }

    #[test]
    fn derived_quantities() {
        let rp = rp();
        assert!((rp.c() - 7.0 * PI / 2.0).abs() < 1e-12);
        assert!((rp.h() - 507.991_148_575_128_55).abs() < 1e-9);
        assert!((rp.w() - 22.0).abs() < 1e-12);
    }

    #[test]
    fn return_rows() {
        let rp = rp();
        let n = 9;
        let d = delta_return(EdgeClass::Headland { j: 1 }, n, &rp).unwrap();
        assert!((d - 432.0).abs() < 1e-9);
        for j in [0, n + 1, 2 * n + 1] {
            let d = delta_return(EdgeClass::Headland { j }, n, &rp).unwrap();
            assert!((d - 432.0).abs() < 1e-9);
        }
        let d = delta_return(EdgeClass::Lane { j: 2, p: 0.25 }, n, &rp).unwrap();
        assert!((d - 1179.986_722_931_446_8).abs() < 1e-6);
        // Upper headland edges heading home: no difference.
        let d = delta_return(EdgeClass::Headland { j: n + 3 }, n, &rp).unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn resume_rows() {
        let rp = rp();
        let n = 9;
        assert_eq!(
            delta_resume(EdgeClass::Lane { j: 1, p: 0.5 }, n, &rp).unwrap(),
            0.0
        );
        let d = delta_resume(EdgeClass::Lane { j: 3, p: 0.25 }, n, &rp).unwrap();
        assert!((d - (-273.995_574_287_564_3)).abs() < 1e-6);
        assert_eq!(
            delta_resume(EdgeClass::Headland { j: 2 * n + 1 }, n, &rp).unwrap(),
            0.0
        );
        let d = delta_resume(EdgeClass::Headland { j: 5 }, n, &rp).unwrap();
        assert!((d + 20.0).abs() < 1e-12);
    }

    #[test]
    fn single_run_rows() {
        assert_eq!(delta_single_run(Pattern::Circ, 9, 36.0).unwrap(), -288.0);
        assert_eq!(delta_single_run(Pattern::CircStar, 9, 36.0).unwrap(), 216.0);
        assert_eq!(delta_single_run(Pattern::CircStar, 3, 36.0).unwrap(), 0.0);
        assert!(delta_single_run(Pattern::Circ, 8, 36.0).is_err());
    }

    #[test]
    fn even_lane_counts_rejected() {
        let rp = rp();
        assert!(matches!(
            delta_return(EdgeClass::Headland { j: 1 }, 8, &rp),
            Err(OracleError::UnsupportedCase(_))
        ));
    }

    #[test]
    fn rect_fixture_normalizes_as_specified() {
        let spec = make_rect_field(500.0, 9, 36.0, 7.0, 10.0).unwrap();
        let sk = generate_skeleton(&spec).unwrap();
        let (nf, chain) = normalize(&spec, &sk).unwrap();
        assert_eq!(nf.lane_count(), 9);
        assert!(chain.reflect_x.is_none() && chain.reflect_y.is_none());
        assert_eq!(nf.entrance_class, EntranceClass::Z01);
        assert!((nf.lane(2).x - nf.lane(1).x - 36.0).abs() < 1e-9);
        for i in 1..=9 {
            assert!((nf.lane(i).len() - 500.0).abs() < 1e-9);
        }
        // Near margin w0/2, far margin w0.
        assert!((nf.lane(1).x - 18.0).abs() < 1e-9);
        let width = nf
            .headland
            .pts
            .iter()
            .map(|p| p.x)
            .fold(f64::NEG_INFINITY, f64::max);
        assert!((width - nf.lane(9).x - 36.0).abs() < 1e-9);
        // Entrance q_l east of lane 1 on the upper headland.
        let e = nf.point_at_s(nf.entrance_s);
        assert!((e.x - 28.0).abs() < 1e-9 && (e.y - 500.0).abs() < 1e-9);
    }

    #[test]
    fn rect_fixture_q_l_zero_hits_the_lane_node() {
        let spec = make_rect_field(300.0, 5, 30.0, 0.0, 0.0).unwrap();
        let sk = generate_skeleton(&spec).unwrap();
        let (nf, _) = normalize(&spec, &sk).unwrap();
        assert!((nf.entrance_s - nf.lane(1).s_hi).abs() < 1e-9);
        assert_eq!(nf.entrance_class, EntranceClass::Z01);
    }

    #[test]
    fn bad_params_rejected() {
        assert!(matches!(
            make_rect_field(500.0, 9, 36.0, 7.0, 40.0),
            Err(OracleError::InvalidParams(_))
        ));
        assert!(matches!(
            make_rect_field(0.0, 9, 36.0, 7.0, 10.0),
            Err(OracleError::InvalidParams(_))
        ));
    }
}

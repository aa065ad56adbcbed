//! Great-circle distances in statute miles.

use thiserror::Error;

pub const EARTH_RADIUS_MILES: f64 = 3958.8;

/// `[lat, lon]` in degrees.
pub type LatLon = [f64; 2];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("invalid coordinate ({0}, {1})")]
    InvalidCoordinate(f64, f64),
    #[error("empty point set")]
    EmptySet,
}

fn check(p: &LatLon) -> Result<(), GeoError> {
    let [lat, lon] = *p;
    if lat.is_finite() && lon.is_finite() && lat.abs() <= 90.0 && lon.abs() <= 180.0 {
        Ok(())
    } else {
        Err(GeoError::InvalidCoordinate(lat, lon))
    }
}

/// Haversine distance between two points.
pub fn haversine_miles(a: &LatLon, b: &LatLon) -> Result<f64, GeoError> {
    check(a)?;
    check(b)?;
    let (lat1, lat2) = (a[0].to_radians(), b[0].to_radians());
    let dlat = lat2 - lat1;
    let dlon = (b[1] - a[1]).to_radians();
    let h = (dlat / 2.0).sin().powi(2) + lat1.cos() * lat2.cos() * (dlon / 2.0).sin().powi(2);
    Ok(2.0 * EARTH_RADIUS_MILES * h.sqrt().min(1.0).asin())
}

/// Localization error: the smallest distance between any estimated point
/// and any terminal of the actual outaged line.
pub fn geo_error(estimated: &[LatLon], actual: &[LatLon]) -> Result<f64, GeoError> {
    if estimated.is_empty() || actual.is_empty() {
        return Err(GeoError::EmptySet);
    }
    let mut best = f64::INFINITY;
    for e in estimated {
        for a in actual {
            best = best.min(haversine_miles(e, a)?);
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn identical_points() {
        let p = [41.51, -72.56];
        assert_eq!(haversine_miles(&p, &p).unwrap(), 0.0);
        assert_eq!(geo_error(&[p], &[p, [40.0, -70.0]]).unwrap(), 0.0);
    }

    #[test]
    fn iso_ne_line_one_length() {
        // independent spherical law of cosines: 23.271883 mi
        let d = haversine_miles(&[41.51, -72.56], &[41.29, -72.90]).unwrap();
        assert!((d - 23.271883).abs() < 1e-5, "{d}");
    }

    #[test]
    fn antipodes() {
        let d = haversine_miles(&[10.0, 20.0], &[-10.0, -160.0]).unwrap();
        // haversine loses about half the digits next to the antipode
        assert!(
            (d - std::f64::consts::PI * EARTH_RADIUS_MILES).abs() < 1e-3,
            "{d}"
        );
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(
            haversine_miles(&[95.0, 0.0], &[0.0, 0.0]),
            Err(GeoError::InvalidCoordinate(..))
        ));
        assert!(matches!(
            geo_error(&[[0.0, 190.0]], &[[0.0, 0.0]]),
            Err(GeoError::InvalidCoordinate(..))
        ));
        assert_eq!(geo_error(&[], &[[0.0, 0.0]]), Err(GeoError::EmptySet));
    }

    fn point() -> impl Strategy<Value = LatLon> {
        (-89.0..89.0f64, -179.0..179.0f64).prop_map(|(a, b)| [a, b])
    }

    proptest! {
        #[test]
        fn geo_error_symmetric_nonnegative(
            a in prop::collection::vec(point(), 1..3),
            b in prop::collection::vec(point(), 1..3),
        ) {
            let ab = geo_error(&a, &b).unwrap();
            let ba = geo_error(&b, &a).unwrap();
            prop_assert!(ab >= 0.0);
            prop_assert!((ab - ba).abs() <= 1e-9);
            prop_assert!(geo_error(&a, &a).unwrap() <= 1e-9);
        }

        #[test]
        fn distinct_points_have_positive_distance(p in point(), dlat in 0.001..1.0f64) {
            let q = [p[0] + dlat, p[1]];
            prop_assert!(haversine_miles(&p, &q).unwrap() > 1e-9);
        }
    }
}

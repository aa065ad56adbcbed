//! GeoJSON export of a localization: one line feature per ranked branch
//! carrying its change, and a point at the estimated location.

use serde_json::{json, Value};

use crate::grid::{GridError, NetworkModel};
use crate::locator::{LocalizationResult, Method};

pub fn localization_geojson(
    result: &LocalizationResult,
    net: &NetworkModel,
) -> Result<Value, GridError> {
    let mut features = Vec::with_capacity(result.ranked.len() + 1);
    for (rank, r) in result.ranked.iter().enumerate() {
        let [a, b] = net.terminals(r.branch_id)?;
        let mut props = json!({
            "branch_id": r.branch_id,
            "channel_id": r.channel_id,
            "rank": rank + 1,
            "magnitude": r.magnitude(),
        });
        if let Some(p) = r.delta_p_mw {
            props["delta_p_mw"] = json!(p);
        }
        if let Some(f) = r.delta_f_hz {
            props["delta_f_hz"] = json!(f);
        }
        features.push(json!({
            "type": "Feature",
            "geometry": {
                "type": "LineString",
                "coordinates": [[a[1], a[0]], [b[1], b[0]]],
            },
            "properties": props,
        }));
    }
    if !result.ranked.is_empty() && !result.terminals.is_empty() {
        let n = result.terminals.len() as f64;
        let lat = result.terminals.iter().map(|p| p[0]).sum::<f64>() / n;
        let lon = result.terminals.iter().map(|p| p[1]).sum::<f64>() / n;
        let method = match result.method {
            Method::PowerChange => "power_change",
            Method::MaxFreqBaseline => "max_freq_baseline",
        };
        features.push(json!({
            "type": "Feature",
            "geometry": { "type": "Point", "coordinates": [lon, lat] },
            "properties": {
                "marker": "estimated_location",
                "method": method,
                "event_time_ms": result.event_time_ms,
                "estimated_branch": result.estimated_branch,
                "low_confidence": result.low_confidence,
            },
        }));
    }
    Ok(json!({ "type": "FeatureCollection", "features": features }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::locator::RankedChange;

    fn result(ranked: Vec<RankedChange>) -> LocalizationResult {
        LocalizationResult {
            method: Method::PowerChange,
            event_time_ms: 1000,
            estimated_branch: 12,
            estimated_channel: 1,
            terminals: vec![[41.0, -72.0], [42.0, -71.0]],
            ranked,
            low_confidence: false,
            noise_floor: 0.5,
            error_miles: None,
        }
    }

    #[test]
    fn one_feature_per_ranked_branch_plus_marker() {
        let net = fixtures::k4();
        let ranked = [(12, -50.0), (13, 25.0), (14, 25.0)]
            .into_iter()
            .enumerate()
            .map(|(i, (b, d))| RankedChange {
                branch_id: b,
                channel_id: i as u32 + 1,
                delta_p_mw: Some(d),
                delta_f_hz: None,
            })
            .collect();
        let g = localization_geojson(&result(ranked), &net).unwrap();
        let f = g["features"].as_array().unwrap();
        assert_eq!(f.len(), 4);
        assert_eq!(f[0]["properties"]["delta_p_mw"], json!(-50.0));
        assert_eq!(f[0]["geometry"]["type"], "LineString");
        let [a, _] = net.terminals(12).unwrap();
        assert_eq!(f[0]["geometry"]["coordinates"][0], json!([a[1], a[0]]));
        assert_eq!(f[3]["geometry"]["coordinates"], json!([-71.5, 41.5]));
    }

    #[test]
    fn empty_ranking_gives_empty_collection() {
        let g = localization_geojson(&result(vec![]), &fixtures::k4()).unwrap();
        assert_eq!(g, json!({"type": "FeatureCollection", "features": []}));
    }
}

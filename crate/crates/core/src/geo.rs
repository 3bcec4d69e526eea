//! Spherical geodesy, Web-Mercator pixel projection and greedy clustering.

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const EARTH_RADIUS_M: f64 = 6_371_000.0;

/// Latitude beyond which Web-Mercator is undefined for square tiles.
pub const MERCATOR_MAX_LAT: f64 = 85.051_128_779_806_59;

pub const TILE_SIZE: f64 = 256.0;

pub const MAX_ZOOM: u8 = 19;

pub const DEFAULT_CLUSTER_RADIUS_PX: f64 = 80.0;

#[derive(Debug, Error, PartialEq)]
pub enum GeoError {
    #[error("latitude {0} outside -90..=90")]
    Latitude(f64),
    #[error("longitude {0} outside -180..=180")]
    Longitude(f64),
    #[error("latitude {0} beyond the Web-Mercator limit of {MERCATOR_MAX_LAT}")]
    MercatorLimit(f64),
    #[error("zoom {0} outside 0..=19")]
    Zoom(i64),
    #[error("bounding box {0}")]
    BoundingBox(String),
    #[error("no sensors to search")]
    NoSensors,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeoPoint {
    pub lat: f64,
    pub lon: f64,
}

impl GeoPoint {
    pub fn new(lat: f64, lon: f64) -> Result<Self, GeoError> {
        let p = Self { lat, lon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        if !(-90.0..=90.0).contains(&self.lat) {
            return Err(GeoError::Latitude(self.lat));
        }
        if !(-180.0..=180.0).contains(&self.lon) {
            return Err(GeoError::Longitude(self.lon));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelPoint {
    pub x: f64,
    pub y: f64,
    pub zoom: u8,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl BoundingBox {
    pub const WORLD: BoundingBox = BoundingBox { min_lon: -180.0, min_lat: -90.0, max_lon: 180.0, max_lat: 90.0 };

    pub fn new(min_lon: f64, min_lat: f64, max_lon: f64, max_lat: f64) -> Result<Self, GeoError> {
        let b = Self { min_lon, min_lat, max_lon, max_lat };
        GeoPoint::new(min_lat, min_lon)?;
        GeoPoint::new(max_lat, max_lon)?;
        if min_lat > max_lat {
            return Err(GeoError::BoundingBox(format!("min_lat {min_lat} > max_lat {max_lat}")));
        }
        if min_lon > max_lon {
            return Err(GeoError::BoundingBox(format!(
                "min_lon {min_lon} > max_lon {max_lon} (antimeridian-crossing boxes are not supported)"
            )));
        }
        Ok(b)
    }

    /// Parses `min_lon,min_lat,max_lon,max_lat`.
    pub fn parse(text: &str) -> Result<Self, GeoError> {
        let parts: Vec<f64> = text
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| GeoError::BoundingBox(format!("{text:?} is not four comma-separated numbers")))?;
        match parts[..] {
            [a, b, c, d] => Self::new(a, b, c, d),
            _ => Err(GeoError::BoundingBox(format!("{text:?} is not four comma-separated numbers"))),
        }
    }

    pub fn contains(&self, p: GeoPoint) -> bool {
        self.min_lat <= p.lat && p.lat <= self.max_lat && self.min_lon <= p.lon && p.lon <= self.max_lon
    }
}

/// Great-circle distance in meters.
pub fn haversine(a: GeoPoint, b: GeoPoint) -> f64 {
    let (phi1, phi2) = (a.lat.to_radians(), b.lat.to_radians());
    let dphi = phi2 - phi1;
    let dlambda = (b.lon - a.lon).to_radians();
    // Written symmetrically so that swapping a and b gives bit-identical results.
    let h = (dphi / 2.0).sin().powi(2) + phi1.cos() * phi2.cos() * (dlambda / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_M * h.sqrt().min(1.0).asin()
}

/// Closest sensor to `p`; ties go to the lexicographically smallest id.
pub fn nearest_sensor<'a, I>(p: GeoPoint, sensors: I) -> Result<(&'a str, f64), GeoError>
where
    I: IntoIterator<Item = (&'a str, GeoPoint)>,
{
    sensors
        .into_iter()
        .map(|(id, loc)| (id, haversine(p, loc)))
        .min_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(b.0)))
        .ok_or(GeoError::NoSensors)
}

fn world_size(zoom: u8) -> f64 {
    TILE_SIZE * f64::from(1u32 << zoom)
}

fn check_zoom(zoom: u8) -> Result<(), GeoError> {
    if zoom > MAX_ZOOM {
        Err(GeoError::Zoom(zoom as i64))
    } else {
        Ok(())
    }
}

pub fn project(p: GeoPoint, zoom: u8) -> Result<PixelPoint, GeoError> {
    check_zoom(zoom)?;
    p.validate()?;
    if p.lat.abs() > MERCATOR_MAX_LAT {
        return Err(GeoError::MercatorLimit(p.lat));
    }
    Ok(project_unchecked(p, zoom))
}

fn project_unchecked(p: GeoPoint, zoom: u8) -> PixelPoint {
    let size = world_size(zoom);
    let phi = p.lat.to_radians();
    let x = (p.lon + 180.0) / 360.0 * size;
    let y = (1.0 - (phi.tan() + 1.0 / phi.cos()).ln() / std::f64::consts::PI) / 2.0 * size;
    PixelPoint { x, y, zoom }
}

pub fn unproject(px: PixelPoint) -> Result<GeoPoint, GeoError> {
    check_zoom(px.zoom)?;
    let size = world_size(px.zoom);
    let lon = px.x / size * 360.0 - 180.0;
    let n = std::f64::consts::PI * (1.0 - 2.0 * px.y / size);
    let lat = n.sinh().atan().to_degrees();
    GeoPoint::new(lat, lon)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cluster {
    pub centroid: GeoPoint,
    pub member_ids: Vec<String>,
    pub count: usize,
}

/// Greedy seed-absorption clustering in pixel space at `zoom`.
///
/// Sites are visited in ascending id order. Each site not yet assigned seeds
/// a new cluster and absorbs every unassigned site within `radius_px` of the
/// seed. Latitudes beyond the Mercator limit are clamped for projection.
pub fn cluster_sites<S: AsRef<str>>(sites: &[(S, GeoPoint)], zoom: u8, radius_px: f64) -> Vec<Cluster> {
    let zoom = zoom.min(MAX_ZOOM);
    let mut order: Vec<usize> = (0..sites.len()).collect();
    order.sort_by(|&a, &b| sites[a].0.as_ref().cmp(sites[b].0.as_ref()));

    let projected: Vec<PixelPoint> = sites
        .iter()
        .map(|(_, p)| {
            let lat = p.lat.clamp(-MERCATOR_MAX_LAT, MERCATOR_MAX_LAT);
            project_unchecked(GeoPoint { lat, lon: p.lon }, zoom)
        })
        .collect();

    let r2 = radius_px * radius_px;
    let mut assigned = vec![false; sites.len()];
    let mut clusters = Vec::new();
    for (pos, &seed) in order.iter().enumerate() {
        if assigned[seed] {
            continue;
        }
        assigned[seed] = true;
        let mut members = vec![seed];
        let s = projected[seed];
        for &other in &order[pos + 1..] {
            if assigned[other] {
                continue;
            }
            let o = projected[other];
            let (dx, dy) = (o.x - s.x, o.y - s.y);
            if dx * dx + dy * dy <= r2 {
                assigned[other] = true;
                members.push(other);
            }
        }
        let n = members.len() as f64;
        let (lat_sum, lon_sum) = members.iter().fold((0.0, 0.0), |(a, b), &i| (a + sites[i].1.lat, b + sites[i].1.lon));
        clusters.push(Cluster {
            centroid: GeoPoint { lat: lat_sum / n, lon: lon_sum / n },
            member_ids: members.iter().map(|&i| sites[i].0.as_ref().to_owned()).collect(),
            count: members.len(),
        });
    }
    clusters
}

/// Items whose location falls inside `bbox`, in input order.
pub fn bbox_filter<T, F>(items: &[T], bbox: &BoundingBox, location: F) -> Vec<T>
where
    T: Clone,
    F: Fn(&T) -> GeoPoint,
{
    items.iter().filter(|t| bbox.contains(location(t))).cloned().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pt(lat: f64, lon: f64) -> GeoPoint {
        GeoPoint::new(lat, lon).unwrap()
    }

    /// Spherical law of cosines, independent of the haversine form.
    fn cosine_law(a: GeoPoint, b: GeoPoint) -> f64 {
        let (p1, p2) = (a.lat.to_radians(), b.lat.to_radians());
        let dl = (b.lon - a.lon).to_radians();
        let c = p1.sin() * p2.sin() + p1.cos() * p2.cos() * dl.cos();
        EARTH_RADIUS_M * c.clamp(-1.0, 1.0).acos()
    }

    #[test]
    fn haversine_examples() {
        let kc = pt(39.0997, -94.5786);
        assert_eq!(haversine(kc, kc), 0.0);
        let d = haversine(pt(0.0, 0.0), pt(0.0, 180.0));
        assert!((d - 20_015_086.8).abs() <= 0.1, "{d}");
        assert!((d - std::f64::consts::PI * EARTH_RADIUS_M).abs() < 1e-6);
        let other = pt(39.0811, -94.6408);
        let d = haversine(kc, other);
        assert!((d - cosine_law(kc, other)).abs() <= 0.5, "{d} vs {}", cosine_law(kc, other));
        assert!(d > 5000.0 && d < 6000.0);
    }

    #[test]
    fn nearest_examples() {
        let p = pt(39.1, -94.6);
        assert_eq!(nearest_sensor(p, [("only", pt(40.0, -90.0))]).unwrap().0, "only");
        let (id, d) = nearest_sensor(p, [("far", pt(40.0, -90.0)), ("here", p)]).unwrap();
        assert_eq!((id, d), ("here", 0.0));
        let q = pt(39.1, 0.0);
        let tied = nearest_sensor(q, [("b", pt(39.1, 0.1)), ("a", pt(39.1, -0.1))]).unwrap();
        assert_eq!(tied.0, "a");
        assert_eq!(nearest_sensor(p, std::iter::empty()), Err(GeoError::NoSensors));
    }

    #[test]
    fn nearest_matches_exhaustive_scan() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        let sensors: Vec<(String, GeoPoint)> = (0..50)
            .map(|i| (format!("s{i:02}"), pt(rng.gen_range(38.8..39.4), rng.gen_range(-94.95..-94.35))))
            .collect();
        for _ in 0..100 {
            let p = pt(rng.gen_range(38.8..39.4), rng.gen_range(-94.95..-94.35));
            let mut best = (sensors[0].0.as_str(), f64::INFINITY);
            for (id, loc) in &sensors {
                let d = haversine(p, *loc);
                if d < best.1 || (d == best.1 && id.as_str() < best.0) {
                    best = (id, d);
                }
            }
            let got = nearest_sensor(p, sensors.iter().map(|(id, l)| (id.as_str(), *l))).unwrap();
            assert_eq!(got, best);
        }
    }

    #[test]
    fn projection_examples() {
        let p = project(pt(0.0, 0.0), 0).unwrap();
        assert!((p.x - 128.0).abs() < 1e-9 && (p.y - 128.0).abs() < 1e-9);
        let p = project(pt(0.0, 180.0), 1).unwrap();
        assert!((p.x - 512.0).abs() < 1e-9 && (p.y - 256.0).abs() < 1e-9);
        assert_eq!(project(pt(86.0, 0.0), 3), Err(GeoError::MercatorLimit(86.0)));
        assert_eq!(project(pt(0.0, 0.0), 20), Err(GeoError::Zoom(20)));
    }

    #[test]
    fn bbox_parsing() {
        let b = BoundingBox::parse("-94.95,38.8,-94.35,39.4").unwrap();
        assert!(b.contains(pt(39.0, -94.6)));
        assert!(BoundingBox::parse("1,2,3").is_err());
        assert!(BoundingBox::parse("a,b,c,d").is_err());
        assert!(BoundingBox::parse("10,0,-10,1").is_err());
        assert!(BoundingBox::parse("0,10,1,-10").is_err());
    }

    #[test]
    fn bbox_filter_examples() {
        let sites = vec![("a", pt(39.0, -94.6)), ("b", pt(10.0, 10.0))];
        assert_eq!(bbox_filter(&sites, &BoundingBox::WORLD, |s| s.1).len(), 2);
        let exact = BoundingBox::new(-94.6, 39.0, -94.6, 39.0).unwrap();
        assert_eq!(bbox_filter(&sites, &exact, |s| s.1), vec![sites[0]]);
    }

    #[test]
    fn clustering_examples() {
        let one = cluster_sites(&[("x", pt(39.1, -94.6))], 10, DEFAULT_CLUSTER_RADIUS_PX);
        assert_eq!(one.len(), 1);
        assert_eq!(one[0].count, 1);
        assert_eq!(one[0].centroid, pt(39.1, -94.6));

        // ~10 km apart east-west.
        let two = [("a", pt(39.1, -94.6)), ("b", pt(39.1, -94.484))];
        assert!(haversine(two[0].1, two[1].1) > 9_900.0);
        assert_eq!(cluster_sites(&two, 18, DEFAULT_CLUSTER_RADIUS_PX).len(), 2);
        let merged = cluster_sites(&two, 5, DEFAULT_CLUSTER_RADIUS_PX);
        assert_eq!(merged.len(), 1);
        assert_eq!(merged[0].member_ids, vec!["a", "b"]);

        let empty: [(&str, GeoPoint); 0] = [];
        assert!(cluster_sites(&empty, 5, DEFAULT_CLUSTER_RADIUS_PX).is_empty());
    }

    #[test]
    fn clustering_seeds_in_id_order() {
        // c sits between a and b; a seeds first and takes c, b is left alone.
        let sites = [("b", pt(0.0, 0.2)), ("c", pt(0.0, 0.1)), ("a", pt(0.0, 0.0))];
        let px_per_deg = project(pt(0.0, 1.0), 10).unwrap().x - project(pt(0.0, 0.0), 10).unwrap().x;
        let radius = px_per_deg * 0.15;
        let clusters = cluster_sites(&sites, 10, radius);
        assert_eq!(clusters.len(), 2);
        assert_eq!(clusters[0].member_ids, vec!["a", "c"]);
        assert_eq!(clusters[1].member_ids, vec!["b"]);
    }

    proptest! {
        #[test]
        fn haversine_is_symmetric(
            a in (-90.0f64..=90.0, -180.0f64..=180.0),
            b in (-90.0f64..=90.0, -180.0f64..=180.0),
        ) {
            let (a, b) = (pt(a.0, a.1), pt(b.0, b.1));
            prop_assert_eq!(haversine(a, b), haversine(b, a));
        }

        #[test]
        fn projection_round_trips(
            lat in -MERCATOR_MAX_LAT..=MERCATOR_MAX_LAT,
            lon in -180.0f64..=180.0,
            zoom in 0u8..=19,
        ) {
            let back = unproject(project(pt(lat, lon), zoom).unwrap()).unwrap();
            prop_assert!((back.lat - lat).abs() <= 1e-9);
            prop_assert!((back.lon - lon).abs() <= 1e-9);
        }
    }
}

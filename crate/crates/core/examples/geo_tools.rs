//! Distances, nearest sensor and tile-pixel projection.

use std::error::Error;

use aqmap::geo::{haversine, nearest_sensor, project, unproject, GeoPoint};

pub fn run() -> Result<(), Box<dyn Error>> {
    let sensors = [
        ("kc-argentine", GeoPoint::new(39.0867, -94.6794)?),
        ("kc-armourdale", GeoPoint::new(39.0978, -94.6472)?),
        ("kc-rosedale", GeoPoint::new(39.0603, -94.6289)?),
    ];
    let me = GeoPoint::new(39.0742, -94.6417)?;

    for (id, p) in &sensors {
        println!("{id:<14} {:>7.0} m away", haversine(me, *p));
    }
    let (id, d) = nearest_sensor(me, sensors.iter().map(|(id, p)| (*id, *p)))?;
    println!("nearest: {id} at {d:.0} m");

    for zoom in [0, 10, 19] {
        let px = project(me, zoom)?;
        let back = unproject(px)?;
        println!("zoom {zoom:>2}: x={:.3} y={:.3}  round trip ({:.9}, {:.9})", px.x, px.y, back.lat, back.lon);
    }

    let antipode = haversine(GeoPoint::new(0.0, 0.0)?, GeoPoint::new(0.0, 180.0)?);
    println!("half the equator: {antipode:.1} m");
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run()
}

//! PM2.5 to AQI, category, guidance and marker color.
//!
//! ```text
//! cargo run --example aqi_calculator -- 7.3 20 41.8 180
//! ```

use std::error::Error;

use aqmap::aqi::{AqiScale, Concentration};

pub fn run(args: &[String]) -> Result<(), Box<dyn Error>> {
    let scale = AqiScale::default();
    let inputs: Vec<f64> = if args.is_empty() {
        vec![0.0, 7.3, 12.0, 12.1, 20.0, 35.4, 41.8, 55.5, 180.0, 420.0, 612.0]
    } else {
        args.iter().map(|a| a.parse()).collect::<Result<_, _>>()?
    };

    println!("{:>8}  {:>4}  {:<30}  color", "µg/m³", "AQI", "category");
    for c in inputs {
        let aqi = scale.pm25_to_aqi(Concentration::new(c)?);
        let cat = scale.category(aqi);
        println!("{c:>8.1}  {:>4}  {:<30}  {}", aqi.value(), cat.name.label(), scale.marker_color(aqi).to_hex());
    }

    println!();
    println!("Chart bands:");
    for band in scale.bands() {
        println!(
            "  {:<30} {:>6.1}..{:<6.1} AQI {:>3}..{:<3} {}",
            band.category.label(),
            band.conc_low,
            band.conc_high,
            band.index_low,
            band.index_high,
            band.color
        );
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run(&std::env::args().skip(1).collect::<Vec<_>>())
}

//! Swapping in a different breakpoint table.
//!
//! The bundled scale is the pre-2024 EPA PM2.5 table. This loads a scale
//! document with the 2024 revision's lower Good/Moderate edges and compares
//! the two. A bad document is rejected before anything uses it.

use std::error::Error;

use aqmap::aqi::{AqiScale, Concentration};

fn revised_scale_json() -> String {
    let default: serde_json::Value = serde_json::from_str(AqiScale::default().source_json()).unwrap();
    let mut doc = default.clone();
    let rows = doc["breakpoints"].as_array_mut().unwrap();
    rows[0]["conc_high"] = 9.0.into();
    rows[1]["conc_low"] = 9.1.into();
    rows[3]["conc_high"] = 125.4.into();
    rows[4]["conc_low"] = 125.5.into();
    rows[4]["conc_high"] = 225.4.into();
    rows[5]["conc_low"] = 225.5.into();
    rows[5]["conc_high"] = 325.4.into();
    rows[6]["conc_low"] = 325.5.into();
    rows[6]["conc_high"] = 500.4.into();
    doc.to_string()
}

pub fn run() -> Result<(), Box<dyn Error>> {
    let old = AqiScale::default();
    let new = AqiScale::from_json(&revised_scale_json())?;

    println!("{:>6}  {:>9}  {:>9}", "µg/m³", "pre-2024", "revised");
    for c in [5.0, 9.0, 10.0, 12.0, 30.0, 130.0, 240.0] {
        let c = Concentration::new(c)?;
        println!("{:>6.1}  {:>9}  {:>9}", c.value(), old.pm25_to_aqi(c).value(), new.pm25_to_aqi(c).value());
    }

    let gap = revised_scale_json().replace("\"conc_low\":9.1", "\"conc_low\":9.5");
    match AqiScale::from_json(&gap) {
        Ok(_) => println!("unexpectedly accepted a table with a gap"),
        Err(e) => println!("\nrejected: {e}"),
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn Error>> {
    run()
}

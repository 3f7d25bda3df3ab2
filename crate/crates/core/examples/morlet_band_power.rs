//! Morlet band power of a two-channel test signal: a 10 Hz tone that turns
//! on half-way through, and a 100 Hz tone throughout.

use ndarray::Array2;
use sozgraph::dsp::{morlet_power_matrix, Band, Recording};

fn main() -> sozgraph::Result<()> {
    let rate = 1000.0;
    let n = 12_000;
    let samples = Array2::from_shape_fn((2, n), |(ch, t)| {
        let s = t as f64 / rate;
        match ch {
            0 if t >= n / 2 => (2.0 * std::f64::consts::PI * 10.0 * s).sin(),
            0 => 0.0,
            _ => (2.0 * std::f64::consts::PI * 100.0 * s).sin(),
        }
    });
    let rec = Recording::new(samples, rate, None)?;
    for band in [Band::Alpha, Band::HighGamma] {
        let power = morlet_power_matrix(&rec, &band.def(), 7.0, 8)?;
        for (ch, row) in power.outer_iter().enumerate() {
            let cells: Vec<String> = row.iter().map(|p| format!("{p:.3}")).collect();
            println!("{:>10} ch{ch}: {}", band.name(), cells.join(" "));
        }
    }
    Ok(())
}

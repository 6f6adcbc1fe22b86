//! Writes a synthetic dataset as CSV: `synthetic_csv <out.csv> [n] [seed]`.
//! Columns: zone, x1, x2, color, label, bb.

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let out = args.next().ok_or("usage: synthetic_csv <out.csv> [n] [seed]")?;
    let n = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1000);
    let seed = args.next().map(|s| s.parse()).transpose()?.unwrap_or(42);
    hybrid_core::synth::zoned(n, 0.8, 0.05, seed)?.save(&out, "label", "bb")?;
    Ok(())
}

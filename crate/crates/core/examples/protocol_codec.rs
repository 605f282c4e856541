//! The FF-ICE style messages of one run: each delivered message is encoded,
//! decoded and compared, then the exchange is printed as a sequence chart.
//!
//! cargo run -p tbo-foc --example protocol_codec -- [scenario.json] [seed]

use std::path::PathBuf;

use tbo_foc::protocol::{decode, decode_stream, encode};
use tbo_foc::scenario::{bundled_path, load_scenario};
use tbo_foc::sim::Simulation;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args
        .next()
        .map(PathBuf::from)
        .unwrap_or_else(|| bundled_path("minimal"));
    let seed: u64 = args.next().map(|s| s.parse()).transpose()?.unwrap_or(1);

    let mut sim = Simulation::new(load_scenario(&path)?, seed)?;
    sim.run_to_end()?;

    let mut stream = Vec::new();
    let mut downlinks = 0usize;
    for m in sim.log().messages() {
        let bytes = encode(m);
        assert_eq!(&decode(&bytes)?, m, "codec round trip");
        stream.extend_from_slice(&bytes);
        if m.kind().name() == "EPP_DOWNLINK" {
            downlinks += 1;
            continue;
        }
        println!(
            "{:>9.1}s  {:<6} -> {:<8} {:<24} {} bytes",
            m.received_at_ms as f64 / 1000.0,
            m.sender,
            m.receiver,
            m.kind().name(),
            bytes.len()
        );
    }
    let decoded = decode_stream(&stream)?;
    println!(
        "\n{} messages ({} EPP downlinks not listed), {} bytes, stream decodes to {} messages",
        sim.log().messages().count(),
        downlinks,
        stream.len(),
        decoded.len()
    );
    Ok(())
}

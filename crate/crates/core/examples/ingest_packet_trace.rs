//! Load an analyser-style packet export and bin it into packets per second.
//!
//! ```sh
//! cargo run --example ingest_packet_trace
//! ```

use trafficast::ingest::{self, ProtocolFilter};

const EXPORT: &str = "\
\"No.\",\"Time\",\"Source\",\"Destination\",\"Protocol\",\"Length\"
\"1\",\"0.000000\",\"10.0.0.2\",\"93.184.216.34\",\"TCP\",\"66\"
\"2\",\"0.112300\",\"10.0.0.2\",\"10.0.0.1\",\"DNS\",\"74\"
\"3\",\"0.254100\",\"93.184.216.34\",\"10.0.0.2\",\"TCP\",\"1514\"
\"4\",\"0.990000\",\"10.0.0.2\",\"203.0.113.9\",\"UDP\",\"120\"
\"5\",\"1.310200\",\"203.0.113.9\",\"10.0.0.2\",\"UDP\",\"1200\"
\"6\",\"2.020000\",\"10.0.0.2\",\"10.0.0.1\",\"ICMP\",\"98\"
\"7\",\"3.500000\",\"10.0.0.2\",\"93.184.216.34\",\"TCP\",\"66\"
";

pub fn run() -> trafficast::Result<()> {
    let trace = ingest::load_packet_trace(EXPORT.as_bytes(), ProtocolFilter::TcpUdp)?;
    println!("{} TCP/UDP packets kept", trace.len());

    let rate = ingest::bin_to_rate(&trace, 1.0)?;
    println!("packets per second: {:?}", rate.values());

    let everything = ingest::load_packet_trace(EXPORT.as_bytes(), ProtocolFilter::All)?;
    let half_second = ingest::bin_to_rate(&everything, 0.5)?;
    println!("all protocols, 0.5 s bins: {:?}", half_second.values());

    print!("{}", rate.to_csv_string());
    Ok(())
}

#[allow(dead_code)]
fn main() -> trafficast::Result<()> {
    run()
}

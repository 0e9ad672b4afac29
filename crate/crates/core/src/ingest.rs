//! Packet-log and pre-binned series ingestion.
//!
//! Packet logs are CSV exports with at least a `time` column (seconds since
//! capture start) and a `protocol` column. Extra columns, such as the ones a
//! protocol analyser writes, are ignored. Header matching is
//! case-insensitive, so `Time,Protocol` works as well.
//!
//! Binning timestamps into fixed-width bins is the same as differencing the
//! cumulative packet count sampled at the bin edges.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Upper bound on the number of bins a single trace may produce.
const MAX_BINS: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Protocol {
    Tcp,
    Udp,
    Other,
}

impl Protocol {
    pub fn parse(tag: &str) -> Self {
        let tag = tag.trim();
        if tag.eq_ignore_ascii_case("tcp") {
            Protocol::Tcp
        } else if tag.eq_ignore_ascii_case("udp") {
            Protocol::Udp
        } else {
            Protocol::Other
        }
    }

    pub fn is_transport(self) -> bool {
        matches!(self, Protocol::Tcp | Protocol::Udp)
    }
}

/// Which packets survive ingestion.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ProtocolFilter {
    /// Keep TCP and UDP packets only.
    #[default]
    TcpUdp,
    /// Keep every packet.
    All,
}

impl ProtocolFilter {
    fn keeps(self, p: Protocol) -> bool {
        match self {
            ProtocolFilter::TcpUdp => p.is_transport(),
            ProtocolFilter::All => true,
        }
    }
}

/// Packet arrival times, sorted, with a protocol tag per packet.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PacketTrace {
    timestamps: Vec<f64>,
    protocols: Vec<Protocol>,
}

impl PacketTrace {
    /// Builds a trace from unsorted packets. Timestamps must be finite and `>= 0`.
    pub fn new(mut packets: Vec<(f64, Protocol)>) -> Result<Self> {
        if let Some((t, _)) = packets.iter().find(|(t, _)| !t.is_finite() || *t < 0.0) {
            return Err(Error::invalid(format!("timestamp must be finite and >= 0, got {t}")));
        }
        packets.sort_by(|a, b| a.0.total_cmp(&b.0));
        let (timestamps, protocols) = packets.into_iter().unzip();
        Ok(Self {
            timestamps,
            protocols,
        })
    }

    pub fn timestamps(&self) -> &[f64] {
        &self.timestamps
    }

    pub fn protocols(&self) -> &[Protocol] {
        &self.protocols
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }
}

fn find_column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name))
}

fn csv_reader<R: Read>(source: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source)
}

fn csv_error(err: csv::Error, line_offset: u64) -> Error {
    let line = err.position().map(|p| p.line()).unwrap_or(0) + line_offset;
    Error::Parse {
        line,
        message: err.to_string(),
    }
}

/// Reads a `time,protocol` packet log.
///
/// Rows are filtered by `filter` and the result is sorted by time.
pub fn load_packet_trace<R: Read>(source: R, filter: ProtocolFilter) -> Result<PacketTrace> {
    let mut rdr = csv_reader(source);
    let headers = rdr.headers().map_err(|e| csv_error(e, 0))?.clone();
    let time_col = find_column(&headers, "time").ok_or(Error::Parse {
        line: 1,
        message: "missing `time` column".into(),
    })?;
    let proto_col = find_column(&headers, "protocol").ok_or(Error::Parse {
        line: 1,
        message: "missing `protocol` column".into(),
    })?;

    let mut packets = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(e, 0))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let field = |col: usize, what: &str| {
            record.get(col).ok_or_else(|| Error::Parse {
                line,
                message: format!("missing {what} field"),
            })
        };
        let raw_time = field(time_col, "time")?;
        let time: f64 = raw_time.parse().map_err(|_| Error::Parse {
            line,
            message: format!("invalid timestamp {raw_time:?}"),
        })?;
        if !time.is_finite() {
            return Err(Error::Parse {
                line,
                message: format!("invalid timestamp {raw_time:?}"),
            });
        }
        if time < 0.0 {
            return Err(Error::invalid(format!("negative timestamp {time} at line {line}")));
        }
        let protocol = Protocol::parse(field(proto_col, "protocol")?);
        if filter.keeps(protocol) {
            packets.push((time, protocol));
        }
    }
    PacketTrace::new(packets)
}

/// Counts packets per bin of `bin_width` seconds.
///
/// Bin `i` covers `[i·w, (i+1)·w)`. The last, possibly partial, bin is kept,
/// so the length is `floor(t_max / w) + 1`.
pub fn bin_to_rate(trace: &PacketTrace, bin_width: f64) -> Result<TimeSeries> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(Error::invalid(format!("bin width must be > 0, got {bin_width}")));
    }
    let t_max = *trace
        .timestamps
        .last()
        .ok_or_else(|| Error::invalid("cannot bin an empty trace"))?;
    let last_bin = (t_max / bin_width).floor();
    if last_bin >= MAX_BINS {
        return Err(Error::invalid(format!(
            "trace of {t_max} s at bin width {bin_width} s needs too many bins"
        )));
    }
    let mut counts = vec![0.0; last_bin as usize + 1];
    for &t in &trace.timestamps {
        counts[(t / bin_width).floor() as usize] += 1.0;
    }
    TimeSeries::new(counts, bin_width, 0.0)
}

/// Reads a single-column `value` series.
///
/// Leading `# key=value` lines may set `dt` (default 1 s) and `origin`
/// (default 0). Line numbers in errors refer to the whole file.
pub fn load_series_csv<R: Read>(mut source: R) -> Result<TimeSeries> {
    let mut text = String::new();
    source.read_to_string(&mut text)?;

    let mut dt = 1.0;
    let mut origin = 0.0;
    let mut offset = 0u64;
    let mut body = text.as_str();
    while body.trim_start_matches([' ', '\t']).starts_with('#') {
        offset += 1;
        let (line, rest) = body.split_once('\n').unwrap_or((body, ""));
        let meta = line.trim().trim_start_matches('#').trim();
        if let Some((key, value)) = meta.split_once('=') {
            let parsed = value.trim().parse::<f64>().map_err(|_| Error::Parse {
                line: offset,
                message: format!("invalid metadata value {:?}", value.trim()),
            });
            match key.trim() {
                "dt" => dt = parsed?,
                "origin" => origin = parsed?,
                _ => {}
            }
        }
        body = rest;
    }

    let mut rdr = csv_reader(body.as_bytes());
    let headers = rdr.headers().map_err(|e| csv_error(e, offset))?.clone();
    let col = match find_column(&headers, "value") {
        Some(c) => c,
        None if headers.len() == 1 => 0,
        None => {
            return Err(Error::Parse {
                line: offset + 1,
                message: "missing `value` column".into(),
            })
        }
    };

    let mut values = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| csv_error(e, offset))?;
        let line = record.position().map(|p| p.line()).unwrap_or(0) + offset;
        let raw = record.get(col).unwrap_or("");
        match raw.parse::<f64>() {
            Ok(v) if v.is_finite() => values.push(v),
            _ => {
                return Err(Error::Parse {
                    line,
                    message: format!("invalid value {raw:?}"),
                })
            }
        }
    }
    if values.is_empty() {
        return Err(Error::EmptySeries);
    }
    TimeSeries::new(values, dt, origin)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn trace(csv: &str) -> Result<PacketTrace> {
        load_packet_trace(csv.as_bytes(), ProtocolFilter::TcpUdp)
    }

    #[test]
    fn filters_non_transport_packets() {
        let t = trace("time,protocol\n0.0,TCP\n0.5,UDP\n0.7,ICMP\n").unwrap();
        assert_eq!(t.timestamps(), &[0.0, 0.5]);
        assert_eq!(t.protocols(), &[Protocol::Tcp, Protocol::Udp]);

        let all = load_packet_trace(
            "time,protocol\n0.0,TCP\n0.5,UDP\n0.7,ICMP\n".as_bytes(),
            ProtocolFilter::All,
        )
        .unwrap();
        assert_eq!(all.len(), 3);
    }

    #[test]
    fn empty_body_gives_empty_trace() {
        assert!(trace("time,protocol\n").unwrap().is_empty());
    }

    #[test]
    fn sorts_timestamps() {
        let t = trace("time,protocol\n1.0,TCP\n0.2,TCP\n").unwrap();
        assert_eq!(t.timestamps(), &[0.2, 1.0]);
    }

    #[test]
    fn analyser_export_columns() {
        let csv = "\"No.\",\"Time\",\"Source\",\"Protocol\",\"Length\"\n\
                   \"1\",\"0.000\",\"10.0.0.1\",\"TCP\",\"60\"\n\
                   \"2\",\"0.250\",\"10.0.0.2\",\"DNS\",\"80\"\n\
                   \"3\",\"1.100\",\"10.0.0.1\",\"udp\",\"90\"\n";
        let t = trace(csv).unwrap();
        assert_eq!(t.timestamps(), &[0.0, 1.1]);
    }

    #[test]
    fn malformed_row_reports_line() {
        let err = trace("time,protocol\n0.1,TCP\nxyz,TCP\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }), "{err:?}");
    }

    #[test]
    fn negative_timestamp_is_rejected() {
        let err = trace("time,protocol\n-0.5,TCP\n").unwrap_err();
        assert!(matches!(err, Error::Invalid(_)), "{err:?}");
    }

    #[test]
    fn bins_counts() {
        let t = PacketTrace::new(vec![
            (0.1, Protocol::Tcp),
            (0.2, Protocol::Tcp),
            (1.5, Protocol::Udp),
        ])
        .unwrap();
        let s = bin_to_rate(&t, 1.0).unwrap();
        assert_eq!(s.values(), &[2.0, 1.0]);
        assert_eq!(s.dt(), 1.0);

        let single = PacketTrace::new(vec![(0.0, Protocol::Tcp)]).unwrap();
        assert_eq!(bin_to_rate(&single, 1.0).unwrap().values(), &[1.0]);
    }

    #[test]
    fn empty_trace_cannot_be_binned() {
        assert!(bin_to_rate(&PacketTrace::default(), 1.0).is_err());
        let t = PacketTrace::new(vec![(0.0, Protocol::Tcp)]).unwrap();
        assert!(bin_to_rate(&t, 0.0).is_err());
    }

    #[test]
    fn uniform_timestamps_match_brute_force_count() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let stamps: Vec<f64> = (0..1000).map(|_| rng.random_range(0.0..10.0)).collect();
        let trace =
            PacketTrace::new(stamps.iter().map(|&t| (t, Protocol::Tcp)).collect()).unwrap();
        let rate = bin_to_rate(&trace, 1.0).unwrap();

        // brute force: test every timestamp against every interval
        let t_max = stamps.iter().cloned().fold(0.0, f64::max);
        let n_bins = (0..).find(|&i| (i as f64) > t_max).unwrap();
        let expected: Vec<f64> = (0..n_bins)
            .map(|i| {
                let (lo, hi) = (i as f64, (i + 1) as f64);
                stamps.iter().filter(|&&t| lo <= t && t < hi).count() as f64
            })
            .collect();
        assert_eq!(rate.values(), expected.as_slice());
        assert_eq!(rate.values().iter().sum::<f64>(), 1000.0);
    }

    #[test]
    fn series_csv_basic() {
        let s = load_series_csv("value\n3\n1\n4\n".as_bytes()).unwrap();
        assert_eq!(s.values(), &[3.0, 1.0, 4.0]);
        assert_eq!(s.dt(), 1.0);
    }

    #[test]
    fn series_csv_header_only() {
        let err = load_series_csv("value\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::EmptySeries));
        assert_eq!(err.to_string(), "empty series");
    }

    #[test]
    fn series_csv_bad_value_line() {
        let err = load_series_csv("value\n1\n2\nabc\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err:?}");

        let err = load_series_csv("# dt=0.5\nvalue\n1\nabc\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 4, .. }), "{err:?}");
    }

    #[test]
    fn series_csv_metadata() {
        let s = load_series_csv("# dt=0.25\n# origin=3\nvalue\n1\n".as_bytes()).unwrap();
        assert_eq!(s.dt(), 0.25);
        assert_eq!(s.origin(), 3.0);
    }

    proptest! {
        #[test]
        fn binned_total_equals_transport_packets(
            packets in prop::collection::vec((0.0f64..500.0, 0u8..3), 1..200),
            width in 0.05f64..20.0,
        ) {
            let tagged: Vec<(f64, Protocol)> = packets
                .iter()
                .map(|&(t, p)| (t, [Protocol::Tcp, Protocol::Udp, Protocol::Other][p as usize]))
                .collect();
            let transport: Vec<_> = tagged.iter().cloned().filter(|p| p.1.is_transport()).collect();
            prop_assume!(!transport.is_empty());
            let trace = PacketTrace::new(transport.clone()).unwrap();
            let total: f64 = bin_to_rate(&trace, width).unwrap().values().iter().sum();
            prop_assert_eq!(total as usize, transport.len());
        }

        #[test]
        fn binning_ignores_input_order(
            mut stamps in prop::collection::vec(0.0f64..100.0, 1..100),
            width in 0.1f64..5.0,
        ) {
            let a = PacketTrace::new(stamps.iter().map(|&t| (t, Protocol::Tcp)).collect()).unwrap();
            stamps.reverse();
            let half = stamps.len() / 2;
            stamps.rotate_left(half);
            let b = PacketTrace::new(stamps.iter().map(|&t| (t, Protocol::Tcp)).collect()).unwrap();
            prop_assert_eq!(bin_to_rate(&a, width).unwrap(), bin_to_rate(&b, width).unwrap());
        }

        #[test]
        fn series_csv_round_trip(values in prop::collection::vec(-1e12f64..1e12, 1..50), dt in 1e-3f64..100.0) {
            let s = TimeSeries::new(values, dt, 0.0).unwrap();
            let back = load_series_csv(s.to_csv_string().as_bytes()).unwrap();
            prop_assert_eq!(back, s);
        }
    }
}

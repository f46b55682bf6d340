//! Sliding-window feature construction.
//!
//! Instance `t` of a session concatenates the decision vectors of events
//! `t, t-1, ..., t-(s-1)`, most recent first. Positions before the start of
//! the session are filled with zero vectors. Windows never cross session
//! boundaries and targets are copied unchanged.

use std::io::Write;

use crate::detectors::{DecisionStream, DecisionVector, N_DETECTORS};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct WindowedInstance {
    /// `4 * s` values.
    pub features: Vec<f64>,
    pub target: bool,
    pub session_id: String,
    pub event_index: usize,
}

/// Builds one windowed instance per event of a single session.
pub fn build_windowed(
    stream: &[(DecisionVector, bool)],
    s: usize,
    session_id: &str,
) -> Result<Vec<WindowedInstance>> {
    if s < 1 {
        return Err(Error::Argument("window size must be at least 1".to_owned()));
    }
    let out = (0..stream.len())
        .map(|t| {
            let mut features = Vec::with_capacity(N_DETECTORS * s);
            for lag in 0..s {
                let v = t.checked_sub(lag).map_or(DecisionVector::ZERO, |i| stream[i].0);
                features.extend_from_slice(&v.to_array());
            }
            WindowedInstance {
                features,
                target: stream[t].1,
                session_id: session_id.to_owned(),
                event_index: t,
            }
        })
        .collect();
    Ok(out)
}

/// Windows every session independently and concatenates the results in
/// session order.
pub fn build_corpus(streams: &[DecisionStream], s: usize) -> Result<Vec<WindowedInstance>> {
    let mut out = Vec::with_capacity(streams.iter().map(DecisionStream::len).sum());
    for stream in streams {
        out.extend(build_windowed(&stream.rows, s, &stream.session_id)?);
    }
    Ok(out)
}

/// Writes `session_id,event_index,target,f0,...,f{4s-1}`.
pub fn write_corpus_csv<W: Write>(instances: &[WindowedInstance], out: W) -> Result<()> {
    let dim = instances.first().map_or(0, |i| i.features.len());
    let mut w = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| Error::Validation(format!("writing corpus CSV: {e}"));
    let mut header = vec!["session_id".to_owned(), "event_index".to_owned(), "target".to_owned()];
    header.extend((0..dim).map(|i| format!("f{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for inst in instances {
        let mut row = vec![
            inst.session_id.clone(),
            inst.event_index.to_string(),
            u8::from(inst.target).to_string(),
        ];
        row.extend(inst.features.iter().map(|v| format!("{v:.6}")));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush()
        .map_err(|e| Error::Validation(format!("writing corpus CSV: {e}")))
}

//! Text summaries and the per-flow loss histogram.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::MeasurementRecord;
use crate::control::session::PathDirection;

/// Total loss of one measured direction, as seen by PF-PLM and (when
/// available) by the simulator's drop oracle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlowLoss {
    pub measure_id: u32,
    pub direction: PathDirection,
    pub sid_list: String,
    pub blocks: usize,
    pub measured: i64,
    pub oracle: Option<u64>,
}

/// Number of flows per exact total-loss count.
pub type Histogram = BTreeMap<i64, usize>;

pub fn loss_histogram(totals: impl IntoIterator<Item = i64>) -> Histogram {
    let mut hist = Histogram::new();
    for loss in totals {
        *hist.entry(loss).or_default() += 1;
    }
    hist
}

/// Side-by-side histogram table with one row per loss count seen by either
/// column.
pub fn format_histogram(measured: &Histogram, oracle: &Histogram) -> String {
    let mut out = String::new();
    let width = measured.values().chain(oracle.values()).copied().max().unwrap_or(0);
    let _ = writeln!(out, "{:>6}  {:<w$}  {:<w$}", "loss", "PF-PLM", "oracle", w = width.max(6) + 4);
    let keys: std::collections::BTreeSet<i64> = measured.keys().chain(oracle.keys()).copied().collect();
    for loss in keys {
        let m = measured.get(&loss).copied().unwrap_or(0);
        let o = oracle.get(&loss).copied().unwrap_or(0);
        let _ = writeln!(
            out,
            "{loss:>6}  {:<w$}  {:<w$}",
            format!("{} {m}", "#".repeat(m)),
            format!("{} {o}", "#".repeat(o)),
            w = width.max(6) + 4
        );
    }
    out
}

/// Per-flow totals from a set of records, in (measure_id, direction) order.
pub fn flow_totals(records: &[MeasurementRecord]) -> Vec<FlowLoss> {
    let mut flows: BTreeMap<(u32, PathDirection), FlowLoss> = BTreeMap::new();
    for r in records {
        let entry = flows.entry((r.measure_id, r.direction)).or_insert_with(|| FlowLoss {
            measure_id: r.measure_id,
            direction: r.direction,
            sid_list: r.sid_list.clone(),
            blocks: 0,
            measured: 0,
            oracle: None,
        });
        entry.blocks += 1;
        entry.measured += r.interval_loss;
    }
    flows.into_values().collect()
}

/// One row per measured direction with PF-PLM and oracle totals.
pub fn format_flow_table(flows: &[FlowLoss]) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{:>6} {:<8} {:>6} {:>8} {:>8} {:>5}  sid_list",
        "id", "dir", "blocks", "PF-PLM", "oracle", "match"
    );
    for f in flows {
        let (oracle, matched) = match f.oracle {
            Some(o) => (o.to_string(), if f.measured == o as i64 { "yes" } else { "NO" }),
            None => ("-".to_string(), "-"),
        };
        let _ = writeln!(
            out,
            "{:>6} {:<8} {:>6} {:>8} {:>8} {:>5}  {}",
            f.measure_id,
            f.direction.to_string(),
            f.blocks,
            f.measured,
            oracle,
            matched,
            f.sid_list
        );
    }
    out
}

/// Per-session totals, a per-block table and any flagged records.
pub fn format_report(records: &[MeasurementRecord]) -> String {
    let mut out = String::new();
    if records.is_empty() {
        return out;
    }
    let mut sorted = records.to_vec();
    sorted.sort_by_key(MeasurementRecord::key);

    let _ = writeln!(out, "sessions");
    let _ = writeln!(
        out,
        "{:>6} {:<8} {:>6} {:>10} {:>10} {:>6} {:>7}  sid_list",
        "id", "dir", "blocks", "tx", "rx", "loss", "flagged"
    );
    for flow in flow_totals(&sorted) {
        let rows = sorted
            .iter()
            .filter(|r| r.measure_id == flow.measure_id && r.direction == flow.direction);
        let (tx, rx, flagged) = rows.fold((0u64, 0u64, 0usize), |(tx, rx, f), r| {
            (tx + r.interval_tx, rx + r.interval_rx, f + usize::from(r.flagged()))
        });
        let _ = writeln!(
            out,
            "{:>6} {:<8} {:>6} {:>10} {:>10} {:>6} {:>7}  {}",
            flow.measure_id,
            flow.direction.to_string(),
            flow.blocks,
            tx,
            rx,
            flow.measured,
            flagged,
            flow.sid_list
        );
    }

    let _ = writeln!(out, "\nblocks");
    let _ = writeln!(
        out,
        "{:>6} {:<8} {:>5} {:>5} {:>8} {:>8} {:>6} {:>8} {:>10}",
        "id", "dir", "epoch", "color", "tx", "rx", "loss", "cum_loss", "time"
    );
    for r in &sorted {
        let _ = writeln!(
            out,
            "{:>6} {:<8} {:>5} {:>5} {:>8} {:>8} {:>6} {:>8} {:>10.3}",
            r.measure_id,
            r.direction.to_string(),
            r.epoch,
            r.color.to_string(),
            r.interval_tx,
            r.interval_rx,
            r.interval_loss,
            r.cumulative_loss,
            r.timestamp
        );
    }

    let flagged: Vec<&MeasurementRecord> = sorted.iter().filter(|r| r.flagged()).collect();
    if !flagged.is_empty() {
        let _ = writeln!(out, "\nanomalies");
        for r in flagged {
            let mut flags = Vec::new();
            if r.negative_loss {
                flags.push("NegativeLoss");
            }
            if r.active_read {
                flags.push("ActiveRead");
            }
            if r.margin_suspect {
                flags.push("MarginExceeded");
            }
            let _ = writeln!(
                out,
                "{:>6} {:<8} epoch {:>4}: {}",
                r.measure_id,
                r.direction.to_string(),
                r.epoch,
                flags.join(", ")
            );
        }
    }
    out
}

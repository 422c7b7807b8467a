//! CSV output. Floats use Rust's shortest round-trip formatting; missing
//! values are empty fields; lines end in LF.

use std::io::{self, Write};

use super::{ParityPoint, Record, SimResult};

pub const RAW_HEADER: &str =
    "model,delta,p,n,replicate,variable,pap_emp,loco_emp,c_hat,t_emp,pap_clamped,loco_clamped,seed";
pub const AGGREGATE_HEADER: &str =
    "model,delta,p,n,metric,emp_mean,emp_sd,emp_2se,theory_raw,theory_corrected,rel_diff,abs_diff,clamp_rate";
pub const PARITY_HEADER: &str = "delta,p,n,replicate,variable,t_transformed,loco_corrected";

fn num(v: f64) -> String {
    if v.is_finite() {
        v.to_string()
    } else {
        String::new()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

pub fn write_raw_csv<W: Write>(records: &[Record], mut out: W) -> io::Result<()> {
    writeln!(out, "{RAW_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.model,
            r.delta,
            r.p,
            r.n,
            r.replicate,
            r.variable,
            num(r.pap_emp),
            num(r.loco_emp),
            opt(r.c_hat),
            opt(r.t_emp),
            r.pap_clamped,
            r.loco_clamped,
            r.seed
        )?;
    }
    out.flush()
}

/// `rel_diff`/`abs_diff` are against corrected theory when the run applied
/// the correction, raw theory otherwise.
pub fn write_aggregate_csv<W: Write>(results: &[SimResult], mut out: W) -> io::Result<()> {
    writeln!(out, "{AGGREGATE_HEADER}")?;
    for s in results {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            s.model,
            s.delta,
            s.p,
            s.n,
            s.metric.as_str(),
            num(s.emp_mean),
            num(s.emp_sd),
            num(s.emp_2se),
            num(s.theory_raw),
            num(s.theory_corrected),
            opt(s.rel_diff()),
            num(s.abs_diff()),
            opt(s.clamp_rate)
        )?;
    }
    out.flush()
}

pub fn write_parity_csv<W: Write>(points: &[ParityPoint], mut out: W) -> io::Result<()> {
    writeln!(out, "{PARITY_HEADER}")?;
    for q in points {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            q.delta,
            q.p,
            q.n,
            q.replicate,
            q.variable,
            num(q.t_transformed),
            num(q.loco_corrected)
        )?;
    }
    out.flush()
}

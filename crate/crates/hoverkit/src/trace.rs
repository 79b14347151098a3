//! CSV trace files with a fixed column order.

use std::io::Write;

use hoverkit_core::sim::{SimTrace, TraceRecord};

use crate::AppResult;

/// Column names in file order.
pub fn header() -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend((0..12).map(|i| format!("x{i}")));
    h.extend((0..12).map(|i| format!("xhat{i}")));
    h.push("trP".into());
    h.extend((0..4).map(|i| format!("u_lqr{i}")));
    h.extend((0..4).map(|i| format!("omega_out{i}")));
    h.extend((0..4).map(|i| format!("u_out{i}")));
    for s in ["zupt_flag", "pos_update_flag", "soc", "v_term", "i_draw", "p_elec"] {
        h.push(s.into());
    }
    h
}

fn row(r: &TraceRecord) -> Vec<String> {
    let mut out = Vec::with_capacity(48);
    out.push(r.t.to_string());
    out.extend(r.x.iter().map(|v| v.to_string()));
    out.extend(r.x_hat.iter().map(|v| v.to_string()));
    out.push(r.tr_p.to_string());
    out.extend(r.u_lqr.iter().map(|v| v.to_string()));
    out.extend(r.omega_out.iter().map(|v| v.to_string()));
    out.extend(r.u_out.iter().map(|v| v.to_string()));
    out.push((r.zupt as u8).to_string());
    out.push((r.pos_update as u8).to_string());
    for v in [r.soc, r.v_term, r.i_draw, r.p_elec] {
        out.push(v.to_string());
    }
    out
}

pub fn write_csv<W: Write>(trace: &SimTrace, w: W) -> AppResult<()> {
    let mut wr = csv::Writer::from_writer(w);
    wr.write_record(header())?;
    for r in &trace.records {
        wr.write_record(row(r))?;
    }
    wr.flush()?;
    Ok(())
}

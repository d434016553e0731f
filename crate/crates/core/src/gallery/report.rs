//! Rendering of run reports.

use super::runner::RunReport;

pub fn to_json(report: &RunReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes")
}

pub fn to_table(report: &RunReport) -> String {
    let mut out = format!("scenario {} ({})\n", report.scenario, report.command.name());
    let op_w = report.tasks.iter().map(|t| t.op.len()).max().unwrap_or(2).max(2);
    out.push_str(&format!("{:>3}  {:<op_w$}  {:<12}  {:<12}  {:<5}  summary\n", "#", "op", "expect", "outcome", "ok"));
    for t in &report.tasks {
        let expect = format!("{:?}", t.expect).to_lowercase();
        out.push_str(&format!(
            "{:>3}  {:<op_w$}  {:<12}  {:<12}  {:<5}  {}\n",
            t.index,
            t.op,
            expect,
            t.outcome.label(),
            if t.matched { "yes" } else { "NO" },
            t.summary
        ));
    }
    match &report.first_mismatch {
        None => out.push_str("all tasks matched\n"),
        Some(m) => out.push_str(&format!("mismatch: {m}\n")),
    }
    out
}

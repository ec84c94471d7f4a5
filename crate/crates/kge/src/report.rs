//! Text and JSON renderings of metrics, training logs and sweeps.

use std::fmt::Write;

use quatde_core::eval::SideMetrics;
use quatde_core::{Dataset, EvaluationReport, Metrics, TrainLog};
use serde_json::{json, Map, Value};

/// Which breakdown rows a TSV report carries besides the overall ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Breakdown {
    #[default]
    None,
    Relation,
    Category,
    All,
}

impl Breakdown {
    fn relations(self) -> bool {
        matches!(self, Self::Relation | Self::All)
    }

    fn categories(self) -> bool {
        matches!(self, Self::Category | Self::All)
    }
}

pub const METRICS_HEADER: &str = "scope\tname\tside\tcount\tmr\tmrr\thit1\thit3\thit10";

pub fn metrics_json(m: &Metrics) -> Value {
    json!({
        "count": m.count,
        "mr": m.mr,
        "mrr": m.mrr,
        "hit1": m.hit1,
        "hit3": m.hit3,
        "hit10": m.hit10,
    })
}

/// Both-side metrics at the top level, with `head` and `tail` nested.
fn side_json(s: &SideMetrics) -> Value {
    let mut v = metrics_json(&s.both);
    let obj = v.as_object_mut().expect("object");
    obj.insert("head".into(), metrics_json(&s.head));
    obj.insert("tail".into(), metrics_json(&s.tail));
    v
}

fn relation_name(dataset: &Dataset, r: u32) -> String {
    dataset
        .relations
        .name(r)
        .map(str::to_string)
        .unwrap_or_else(|| r.to_string())
}

pub fn report_json(report: &EvaluationReport, dataset: &Dataset) -> Value {
    let mut v = side_json(&report.overall);
    let per_relation: Map<String, Value> = report
        .per_relation
        .iter()
        .map(|(&r, s)| (relation_name(dataset, r), side_json(s)))
        .collect();
    let per_category: Map<String, Value> = report
        .per_category
        .iter()
        .map(|(c, s)| (c.label().to_string(), side_json(s)))
        .collect();
    let obj = v.as_object_mut().expect("object");
    obj.insert("per_relation".into(), Value::Object(per_relation));
    obj.insert("per_category".into(), Value::Object(per_category));
    v
}

fn push_row(out: &mut String, scope: &str, name: &str, side: &str, m: &Metrics) {
    writeln!(
        out,
        "{scope}\t{name}\t{side}\t{}\t{:.4}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
        m.count, m.mr, m.mrr, m.hit1, m.hit3, m.hit10
    )
    .expect("write to string");
}

fn push_sides(out: &mut String, scope: &str, name: &str, s: &SideMetrics) {
    push_row(out, scope, name, "both", &s.both);
    push_row(out, scope, name, "head", &s.head);
    push_row(out, scope, name, "tail", &s.tail);
}

pub fn report_tsv(report: &EvaluationReport, dataset: &Dataset, breakdown: Breakdown) -> String {
    let mut out = String::new();
    out.push_str(METRICS_HEADER);
    out.push('\n');
    push_sides(&mut out, "overall", "all", &report.overall);
    if breakdown.relations() {
        for (&r, s) in &report.per_relation {
            push_sides(&mut out, "relation", &relation_name(dataset, r), s);
        }
    }
    if breakdown.categories() {
        for (c, s) in &report.per_category {
            push_sides(&mut out, "category", c.label(), s);
        }
    }
    out
}

pub const TRAIN_LOG_HEADER: &str = "epoch\tloss\tvalid_mr\tvalid_mrr\tvalid_hit1\tvalid_hit3\tvalid_hit10";

/// One row per epoch; validation columns are empty on epochs without a check.
pub fn train_log_tsv(log: &TrainLog) -> String {
    let mut out = String::new();
    out.push_str(TRAIN_LOG_HEADER);
    out.push('\n');
    for rec in &log.epochs {
        write!(out, "{}\t{:.6}", rec.epoch, rec.loss).expect("write to string");
        match &rec.valid {
            Some(m) => writeln!(
                out,
                "\t{:.4}\t{:.6}\t{:.6}\t{:.6}\t{:.6}",
                m.mr, m.mrr, m.hit1, m.hit3, m.hit10
            ),
            None => writeln!(out, "\t\t\t\t\t"),
        }
        .expect("write to string");
    }
    out
}

/// Outcome of one sweep point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub dim: usize,
    pub result: Result<Metrics, String>,
}

pub const SWEEP_HEADER: &str = "dim\tmrr\thit10\tstatus";

/// Failed points keep their row with `NA` metrics and the error as status.
pub fn sweep_tsv(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for row in rows {
        match &row.result {
            Ok(m) => writeln!(out, "{}\t{:.6}\t{:.6}\tok", row.dim, m.mrr, m.hit10),
            Err(e) => writeln!(out, "{}\tNA\tNA\t{}", row.dim, e.replace(['\t', '\n'], " ")),
        }
        .expect("write to string");
    }
    out
}

//! Table-style summaries of search results.

use minactor_core::nn::param_count;
use minactor_core::search::{reduction_percent, ArchEval, SearchResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Markdown,
    Csv,
}

pub const COLUMNS: [&str; 10] = [
    "Algorithm",
    "Threshold",
    "Baseline Size",
    "Baseline Reward",
    "Symmetric Size",
    "Symmetric Reward",
    "Actor Size",
    "Reduction",
    "Critic Size",
    "Reward",
];

const MISSING: &str = "--";

/// `|16,16|`; a network without hidden layers prints as `|linear|`.
pub fn size_label(hidden: &[usize]) -> String {
    if hidden.is_empty() {
        return "|linear|".into();
    }
    let inner: Vec<String> = hidden.iter().map(usize::to_string).collect();
    format!("|{}|", inner.join(","))
}

/// `mean ± std` over seeds, two decimals.
pub fn reward_label(eval: &ArchEval) -> String {
    match (eval.mean, eval.std) {
        (Some(m), Some(s)) => format!("{m:.2} ± {s:.2}"),
        _ => "diverged".into(),
    }
}

/// Two decimals, truncated rather than rounded (353 → 41 prints as 88.38%).
pub fn percent_label(p: f64) -> String {
    // The epsilon keeps exact values such as 50% from flooring to 49.99.
    format!("{:.2}%", (p * 100.0 + 1e-7).floor() / 100.0)
}

/// Cells of one report row, in [`COLUMNS`] order.
pub fn row_cells(r: &SearchResult) -> Vec<String> {
    let (in_dim, out_dim) = (r.env.obs_dim(), r.env.act_dim());
    let mut cells = vec![r.algo.name().to_uppercase(), format!("{}", r.spec.threshold)];
    match &r.baseline {
        Some(b) => cells.extend([size_label(&b.arch.actor_hidden), reward_label(b)]),
        None => cells.extend([MISSING.into(), MISSING.into()]),
    }
    match &r.smallest_symmetric {
        Some(s) => cells.extend([size_label(&s.eval.arch.actor_hidden), reward_label(&s.eval)]),
        None => cells.extend([MISSING.into(), "no rung passed".into()]),
    }
    match (&r.smallest_symmetric, &r.smallest_asymmetric) {
        (Some(s), Some(a)) => {
            let sym = param_count(in_dim, &s.eval.arch.actor_hidden, out_dim);
            let asym = param_count(in_dim, &a.eval.arch.actor_hidden, out_dim);
            let reduction = match (sym, asym) {
                (Ok(s), Ok(a)) => percent_label(reduction_percent(s, a)),
                _ => MISSING.into(),
            };
            cells.extend([
                size_label(&a.eval.arch.actor_hidden),
                reduction,
                size_label(&a.eval.arch.critic_hidden),
                reward_label(&a.eval),
            ]);
        }
        _ => cells.extend([MISSING, MISSING, MISSING, MISSING].map(String::from)),
    }
    cells
}

pub fn emit_report(results: &[SearchResult], format: ReportFormat) -> String {
    match format {
        ReportFormat::Markdown => {
            let line = |cells: &[String]| {
                let escaped: Vec<String> = cells.iter().map(|c| c.replace('|', "\\|")).collect();
                format!("| {} |\n", escaped.join(" | "))
            };
            let header: Vec<String> = COLUMNS.iter().map(|c| c.to_string()).collect();
            let mut out = line(&header);
            out.push_str(&format!("|{}\n", "---|".repeat(COLUMNS.len())));
            for r in results {
                out.push_str(&line(&row_cells(r)));
            }
            out
        }
        ReportFormat::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(COLUMNS).expect("in-memory write");
            for r in results {
                w.write_record(row_cells(r)).expect("in-memory write");
            }
            String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 cells")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use minactor_core::algos::{Algo, ArchPair};
    use minactor_core::envs::EnvKind;
    use minactor_core::search::{RungResult, SeedResult, ThresholdSpec};

    fn eval(actor: &[usize], critic: &[usize], mean: f64) -> ArchEval {
        let spec = ThresholdSpec::new(-160.0);
        let seeds = (0..6)
            .map(|s| SeedResult::completed(s, mean + s as f64 - 2.5, 1.0))
            .collect();
        ArchEval::from_seeds(ArchPair::new(actor, critic), seeds, &spec)
    }

    fn ddpg_pendulum() -> SearchResult {
        SearchResult {
            algo: Algo::Ddpg,
            env: EnvKind::Pendulum,
            spec: ThresholdSpec::new(-160.0),
            baseline: Some(eval(&[400, 300], &[400, 300], -145.56)),
            smallest_symmetric: Some(RungResult {
                index: 3,
                eval: eval(&[16, 16], &[16, 16], -150.28),
            }),
            smallest_asymmetric: Some(RungResult {
                index: 1,
                eval: eval(&[4, 4], &[16, 16], -158.97),
            }),
            reduction_percent: Some(88.38),
            audit: None,
            ledger: Vec::new(),
        }
    }

    #[test]
    fn table_row_matches_published_layout() {
        let csv = emit_report(&[ddpg_pendulum()], ReportFormat::Csv);
        let row = csv.lines().nth(1).unwrap();
        assert!(row.contains(r#""|4,4|",88.38%,"|16,16|""#), "{row}");
        assert!(
            row.starts_with(r#"DDPG,-160,"|400,300|",-145.56 ± 1.71,"|16,16|",-150.28 ± 1.71"#),
            "{row}"
        );
        let md = emit_report(&[ddpg_pendulum()], ReportFormat::Markdown);
        assert!(md.contains(r"\|4,4\| | 88.38% | \|16,16\|"), "{md}");
    }

    #[test]
    fn one_row_per_algorithm() {
        let md = emit_report(&[ddpg_pendulum()], ReportFormat::Markdown);
        assert_eq!(md.lines().count(), 3);
        let mut sac = ddpg_pendulum();
        sac.algo = Algo::Sac;
        let csv = emit_report(&[ddpg_pendulum(), sac], ReportFormat::Csv);
        assert_eq!(csv.lines().count(), 3);
    }

    #[test]
    fn formats_carry_the_same_cells() {
        let r = ddpg_pendulum();
        let csv = emit_report(std::slice::from_ref(&r), ReportFormat::Csv);
        let mut reader = csv::Reader::from_reader(csv.as_bytes());
        let from_csv: Vec<String> = reader
            .records()
            .next()
            .unwrap()
            .unwrap()
            .iter()
            .map(String::from)
            .collect();
        let md = emit_report(std::slice::from_ref(&r), ReportFormat::Markdown);
        let md_row = md.lines().nth(2).unwrap();
        let from_md: Vec<String> = md_row
            .replace("\\|", "\u{1}")
            .trim_matches(|c| c == '|' || c == ' ')
            .split(" | ")
            .map(|c| c.replace('\u{1}', "|"))
            .collect();
        assert_eq!(from_csv, from_md);
        assert_eq!(from_csv, row_cells(&r));
    }

    #[test]
    fn reduction_recomputed_from_sizes() {
        let mut r = ddpg_pendulum();
        r.reduction_percent = Some(0.0); // stale value must not leak into the table
        assert_eq!(row_cells(&r)[7], "88.38%");
    }

    #[test]
    fn percent_labels_truncate() {
        assert_eq!(percent_label(reduction_percent(353, 41)), "88.38%");
        assert!((reduction_percent(353, 113) - 67.99).abs() < 5e-3);
        assert_eq!(percent_label(reduction_percent(353, 113)), "67.98%");
        assert_eq!(percent_label(reduction_percent(4, 2)), "50.00%");
        assert_eq!(percent_label(0.0), "0.00%");
    }

    #[test]
    fn labels() {
        assert_eq!(size_label(&[]), "|linear|");
        assert_eq!(size_label(&[400, 300]), "|400,300|");
    }
}

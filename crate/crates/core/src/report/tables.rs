use std::cmp::Ordering;

use super::{Cell, Table, GROUP_COLUMNS};
use crate::stats::{amplification_index, binomial_interval, GroupCount, IntervalMethod, Tally};
use crate::text_annot::{IntersectionTable, WordGapTables};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupStatsOptions {
    pub min_support: u64,
    pub method: IntervalMethod,
    pub confidence: f64,
}

impl GroupStatsOptions {
    pub fn new(min_support: u64) -> Self {
        GroupStatsOptions {
            min_support,
            method: IntervalMethod::default(),
            confidence: 0.95,
        }
    }
}

/// Order by descending pass rate, exactly (cross-multiplied counts).
/// Groups without a defined rate sort last.
pub fn compare_rates(a: &GroupCount, b: &GroupCount) -> Ordering {
    match (a.raw, b.raw) {
        (0, 0) => Ordering::Equal,
        (0, _) => Ordering::Greater,
        (_, 0) => Ordering::Less,
        _ => {
            let lhs = a.passed as u128 * b.raw as u128;
            let rhs = b.passed as u128 * a.raw as u128;
            rhs.cmp(&lhs)
        }
    }
}

/// One row per (dimension, label) in `tally`. Rows below `min_support` keep
/// their counts but have every derived statistic blanked. Sorted by
/// dimension, then descending pass rate (suppressed rows last), then label.
pub fn group_stats_table<F>(name: &str, tally: &Tally, global: GroupCount, opts: GroupStatsOptions, keep: F) -> Table
where
    F: Fn(&str, &str) -> bool,
{
    let mut table = Table::new(name, &GROUP_COLUMNS, Some(opts.min_support));
    let mut entries: Vec<(&str, &str, GroupCount, bool)> = tally
        .iter()
        .filter(|(k, _)| keep(&k.dimension, &k.label))
        .map(|(k, c)| (k.dimension.as_str(), k.label.as_str(), *c, c.raw < opts.min_support))
        .collect();
    entries.sort_by(|a, b| {
        a.0.cmp(b.0)
            .then(a.3.cmp(&b.3))
            .then_with(|| if a.3 { Ordering::Equal } else { compare_rates(&a.2, &b.2) })
            .then(a.1.cmp(b.1))
    });
    for (dim, label, count, suppressed) in entries {
        let (rate, lo, hi, amp) = if suppressed || count.raw == 0 {
            (None, None, None, None)
        } else {
            let ci = binomial_interval(count.passed, count.raw, opts.confidence, opts.method).ok();
            (
                count.pass_rate(),
                ci.map(|c| c.low),
                ci.map(|c| c.high),
                amplification_index(&count, &global).ok(),
            )
        };
        table.suppressed += suppressed as usize;
        table.rows.push(vec![
            Cell::Text(dim.to_string()),
            Cell::Text(label.to_string()),
            Cell::Int(count.raw),
            Cell::Int(count.passed),
            Cell::Float(rate),
            Cell::Float(lo),
            Cell::Float(hi),
            Cell::Float(amp),
            Cell::Bool(suppressed),
        ]);
    }
    table
}

/// Heat-map cells from several intersection grids, each tagged with its map name.
pub fn intersection_table(name: &str, maps: &[(String, IntersectionTable)], min_support: u64) -> Table {
    let mut table = Table::new(
        name,
        &["map", "dimension_a", "dimension_b", "raw", "passed", "pass_rate", "suppressed"],
        Some(min_support),
    );
    for (map, grid) in maps {
        let mut cells: Vec<_> = grid.cells.iter().collect();
        cells.sort_by(|a, b| {
            a.suppressed
                .cmp(&b.suppressed)
                .then_with(|| if a.suppressed { Ordering::Equal } else { compare_rates(&a.count, &b.count) })
                .then_with(|| a.a.cmp(&b.a))
                .then_with(|| a.b.cmp(&b.b))
        });
        for c in cells {
            table.suppressed += c.suppressed as usize;
            table.rows.push(vec![
                Cell::Text(map.clone()),
                Cell::Text(c.a.clone()),
                Cell::Text(c.b.clone()),
                Cell::Int(c.count.raw),
                Cell::Int(c.count.passed),
                Cell::Float(c.pass_rate()),
                Cell::Bool(c.suppressed),
            ]);
        }
    }
    table
}

/// Both ranked word lists; `side` names the group whose rate is higher.
pub fn word_gap_table(name: &str, tables: &WordGapTables, side_a: &str, side_b: &str, min_count: u64) -> Table {
    let cols = [
        "side".to_string(),
        "word".to_string(),
        format!("n_{side_a}"),
        format!("pass_{side_a}"),
        format!("n_{side_b}"),
        format!("pass_{side_b}"),
        "gap".to_string(),
    ];
    let col_refs: Vec<&str> = cols.iter().map(String::as_str).collect();
    let mut table = Table::new(name, &col_refs, Some(min_count));
    for (side, rows) in [(side_a, &tables.side_a), (side_b, &tables.side_b)] {
        for r in rows {
            table.rows.push(vec![
                Cell::Text(side.to_string()),
                Cell::Text(r.word.clone()),
                Cell::Int(r.n_a),
                Cell::Int(r.pass_a),
                Cell::Int(r.n_b),
                Cell::Int(r.pass_b),
                Cell::Float(r.gap),
            ]);
        }
    }
    table.suppressed = tables.rows.iter().filter(|r| r.gap.is_none()).count();
    table
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tally() -> Tally {
        let mut t = Tally::new();
        t.add_count(crate::stats::GroupKey::new("lang", "en"), GroupCount::new(200, 100));
        t.add_count(crate::stats::GroupKey::new("lang", "fr"), GroupCount::new(100, 60));
        t.add_count(crate::stats::GroupKey::new("lang", "de"), GroupCount::new(50, 30));
        t.add_count(crate::stats::GroupKey::new("lang", "xx"), GroupCount::new(5, 5));
        t
    }

    #[test]
    fn ordering_and_suppression() {
        let t = group_stats_table("languages", &tally(), GroupCount::new(355, 195), GroupStatsOptions::new(10), |_, _| true);
        let labels: Vec<String> = t.rows.iter().map(|r| r[1].render()).collect();
        // de and fr tie at 0.6; label breaks the tie. Suppressed xx goes last.
        assert_eq!(labels, ["de", "fr", "en", "xx"]);
        assert_eq!(t.suppressed, 1);
        let xx = &t.rows[3];
        assert_eq!(xx[2].render(), "5");
        assert_eq!(xx[4].render(), "");
        assert_eq!(xx[8].render(), "true");
        let en = &t.rows[2];
        assert_eq!(en[4].render(), "0.500000");
        // amplification = 0.5 / (195/355)
        assert_eq!(en[7].render(), format!("{:.6}", 0.5 / (195.0 / 355.0)));
    }

    #[test]
    fn keep_filter_drops_rows() {
        let t = group_stats_table("languages", &tally(), GroupCount::new(355, 195), GroupStatsOptions::new(10), |_, l| l != "en");
        assert_eq!(t.rows.len(), 3);
    }

    #[test]
    fn exact_rate_comparison() {
        // 1/3 vs 333333/1000000: float-close but not equal.
        assert_eq!(compare_rates(&GroupCount::new(3, 1), &GroupCount::new(1_000_000, 333_333)), Ordering::Less);
        assert_eq!(compare_rates(&GroupCount::new(10, 6), &GroupCount::new(5, 3)), Ordering::Equal);
        assert_eq!(compare_rates(&GroupCount::new(0, 0), &GroupCount::new(5, 0)), Ordering::Greater);
    }
}

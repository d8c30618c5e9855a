//! Per-replicate result rows and their CSV forms.

use std::collections::BTreeMap;
use std::io::Write;

/// One (strategy, order, N, time, replicate) outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub strategy: String,
    pub order: usize,
    pub n: usize,
    /// Evaluation instant (Duffing) or prediction time (battery).
    pub time: Option<f64>,
    pub replicate: usize,
    pub seed: u64,
    pub relative_error: Option<f64>,
    pub recovered: Option<bool>,
    pub delta: Option<f64>,
    pub cond: Option<f64>,
    /// `None` on success, otherwise the error message.
    pub failure: Option<String>,
    /// Seconds spent on the replicate. Kept out of the CSV so reruns compare byte for byte.
    pub wall_time: f64,
}

impl ResultRow {
    pub fn is_ok(&self) -> bool {
        self.failure.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ResultTable {
    /// `#` header lines without the leading marker.
    pub header: Vec<String>,
    pub rows: Vec<ResultRow>,
}

fn opt<T: ToString>(x: &Option<T>) -> String {
    x.as_ref().map(|v| v.to_string()).unwrap_or_default()
}

fn sanitize(s: &str) -> String {
    s.replace([',', '\n', '\r'], ";")
}

/// Group key used for aggregation: strategy, order, N, time.
pub type GroupKey = (String, usize, usize, Option<u64>);

#[derive(Debug, Clone, PartialEq)]
pub struct GroupSummary {
    pub strategy: String,
    pub order: usize,
    pub n: usize,
    pub time: Option<f64>,
    pub replicates: usize,
    pub failures: usize,
    pub mean_error: f64,
    pub std_error: f64,
    /// Fraction of all replicates (failures count as not recovered).
    pub recovery_probability: Option<f64>,
}

impl ResultTable {
    pub fn failures(&self) -> usize {
        self.rows.iter().filter(|r| !r.is_ok()).count()
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for h in &self.header {
            writeln!(w, "# {h}")?;
        }
        writeln!(w, "strategy,p,n,t,replicate,seed,relative_error,recovered,delta,cond,status")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.strategy,
                r.order,
                r.n,
                opt(&r.time),
                r.replicate,
                r.seed,
                opt(&r.relative_error),
                r.recovered.map(|b| if b { "1" } else { "0" }).unwrap_or(""),
                opt(&r.delta),
                opt(&r.cond),
                r.failure.as_deref().map(sanitize).unwrap_or_else(|| "ok".into()),
            )?;
        }
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("ASCII output")
    }

    /// Mean and standard deviation of the error per group, in first-seen order.
    pub fn summarize(&self) -> Vec<GroupSummary> {
        let mut order: Vec<GroupKey> = Vec::new();
        let mut groups: BTreeMap<GroupKey, Vec<&ResultRow>> = BTreeMap::new();
        for r in &self.rows {
            let key = (r.strategy.clone(), r.order, r.n, r.time.map(f64::to_bits));
            let entry = groups.entry(key.clone()).or_default();
            if entry.is_empty() {
                order.push(key);
            }
            entry.push(r);
        }
        order
            .into_iter()
            .map(|key| {
                let rows = &groups[&key];
                let errs: Vec<f64> = rows.iter().filter_map(|r| r.relative_error).collect();
                let m = errs.len() as f64;
                let mean = if errs.is_empty() { f64::NAN } else { errs.iter().sum::<f64>() / m };
                let std = if errs.len() < 2 {
                    0.0
                } else {
                    (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
                };
                let has_flag = rows.iter().any(|r| r.recovered.is_some());
                let recovery_probability = has_flag.then(|| {
                    rows.iter().filter(|r| r.recovered == Some(true)).count() as f64 / rows.len() as f64
                });
                GroupSummary {
                    strategy: key.0.clone(),
                    order: key.1,
                    n: key.2,
                    time: key.3.map(f64::from_bits),
                    replicates: rows.len(),
                    failures: rows.iter().filter(|r| !r.is_ok()).count(),
                    mean_error: mean,
                    std_error: std,
                    recovery_probability,
                }
            })
            .collect()
    }

    /// Whitespace-separated aggregate table readable by gnuplot.
    pub fn write_aggregate<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for h in &self.header {
            writeln!(w, "# {h}")?;
        }
        writeln!(w, "# strategy p n t replicates failures mean_error std_error recovery_probability")?;
        for g in self.summarize() {
            writeln!(
                w,
                "{} {} {} {} {} {} {} {} {}",
                g.strategy,
                g.order,
                g.n,
                g.time.map(|t| t.to_string()).unwrap_or_else(|| "-".into()),
                g.replicates,
                g.failures,
                g.mean_error,
                g.std_error,
                g.recovery_probability.map(|p| p.to_string()).unwrap_or_else(|| "-".into()),
            )?;
        }
        Ok(())
    }

    pub fn find(&self, strategy: &str, n: usize, time: Option<f64>) -> Option<GroupSummary> {
        self.summarize()
            .into_iter()
            .find(|g| g.strategy == strategy && g.n == n && g.time == time)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(strategy: &str, rep: usize, err: Option<f64>) -> ResultRow {
        ResultRow {
            strategy: strategy.into(),
            order: 2,
            n: 10,
            time: None,
            replicate: rep,
            seed: rep as u64,
            relative_error: err,
            recovered: err.map(|e| e <= 0.02),
            delta: Some(0.5),
            cond: Some(2.0),
            failure: if err.is_none() { Some("rank deficient, rank 3".into()) } else { None },
            wall_time: 0.25,
        }
    }

    #[test]
    fn csv_omits_wall_time_and_sanitizes_failures() {
        let t = ResultTable {
            header: vec!["experiment=recovery".into()],
            rows: vec![row("standard", 0, Some(0.01)), row("standard", 1, None)],
        };
        let csv = t.to_csv_string();
        assert!(!csv.contains("0.25"));
        assert!(csv.contains("rank deficient; rank 3"));
        assert_eq!(t.failures(), 1);
        let s = t.find("standard", 10, None).unwrap();
        assert_eq!(s.recovery_probability, Some(0.5));
        assert_eq!(s.mean_error, 0.01);
    }
}

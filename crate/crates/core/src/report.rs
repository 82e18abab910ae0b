//! Trajectory CSV files and the plain-text run report.
//!
//! Every number in the CSV is written with 17 significant digits, which
//! round-trips an `f64` exactly, so verifying a stored trajectory gives the
//! same verdicts as verifying it in memory.

use std::fmt::Write as _;
use std::io::{Read, Write};

use serde::Serialize;

use crate::bounds::{CheckResult, VerificationReport};
use crate::ode::Stats;
use crate::sim::{Metrics, Sample, Trajectory};
use crate::ControllerParams;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("trajectory file is empty")]
    Empty,
    #[error("column mismatch: {0}")]
    Schema(String),
    #[error("row {row}: {msg}")]
    Row { row: usize, msg: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<csv::Error> for ReportError {
    fn from(e: csv::Error) -> Self {
        let row = e.position().map_or(0, |p| p.line() as usize);
        match e.into_kind() {
            csv::ErrorKind::Io(io) => ReportError::Io(io),
            other => ReportError::Row {
                row,
                msg: format!("{other:?}"),
            },
        }
    }
}

fn channel(name: &str, m: usize) -> Vec<String> {
    if m == 1 {
        vec![name.to_string()]
    } else {
        (0..m).map(|j| format!("{name}[{j}]")).collect()
    }
}

/// Header for relative degree `r` and `m` outputs:
/// `t, y, y', …, e, e2, …, psi, psi_des, k, v, u, kappa`.
pub fn csv_header(r: usize, m: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for j in 0..r {
        h.extend(channel(&format!("y{}", "'".repeat(j)), m));
    }
    for i in 1..=r {
        let name = if i == 1 { "e".to_string() } else { format!("e{i}") };
        h.extend(channel(&name, m));
    }
    h.extend(["psi", "psi_des", "k"].map(String::from));
    h.extend(channel("v", m));
    h.extend(channel("u", m));
    h.push("kappa".into());
    h
}

fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes `traj` as CSV; `psi_des` is evaluated from `params`.
pub fn write_csv<W: Write>(out: W, traj: &Trajectory, params: &ControllerParams) -> Result<(), ReportError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(csv_header(traj.r, traj.m))?;
    let mut row = Vec::new();
    for s in &traj.samples {
        row.clear();
        row.push(num(s.t));
        row.extend(s.y.iter().chain(&s.e).map(|&x| num(x)));
        row.extend([s.psi, params.desired_funnel(s.t), s.k].map(num));
        row.extend(s.v.iter().chain(&s.u).map(|&x| num(x)));
        row.push(num(s.kappa));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trajectory written by [`write_csv`] for the given `r` and `m`.
pub fn read_csv<R: Read>(input: R, r: usize, m: usize) -> Result<Trajectory, ReportError> {
    let mut rd = csv::ReaderBuilder::new().has_headers(false).from_reader(input);
    let mut records = rd.records();
    let header = match records.next() {
        None => return Err(ReportError::Empty),
        Some(h) => h?,
    };
    let expected = csv_header(r, m);
    let found: Vec<&str> = header.iter().map(str::trim).collect();
    if found != expected {
        return Err(ReportError::Schema(format!(
            "expected [{}], found [{}]",
            expected.join(", "),
            found.join(", ")
        )));
    }
    let mut traj = Trajectory::new(r, m);
    for (n, rec) in records.enumerate() {
        let rec = rec?;
        let row = n + 2;
        if rec.len() != expected.len() {
            return Err(ReportError::Row {
                row,
                msg: format!("{} fields, expected {}", rec.len(), expected.len()),
            });
        }
        let vals = rec
            .iter()
            .map(|f| f.trim().parse::<f64>())
            .collect::<Result<Vec<f64>, _>>()
            .map_err(|e| ReportError::Row { row, msg: e.to_string() })?;
        let rm = r * m;
        let at = |a: usize, len: usize| vals[a..a + len].to_vec();
        let psi_at = 1 + 2 * rm;
        traj.samples.push(Sample {
            t: vals[0],
            y: at(1, rm),
            e: at(1 + rm, rm),
            psi: vals[psi_at],
            k: vals[psi_at + 2],
            v: at(psi_at + 3, m),
            u: at(psi_at + 3 + m, m),
            kappa: vals[psi_at + 3 + 2 * m],
        });
    }
    if traj.is_empty() {
        return Err(ReportError::Empty);
    }
    if !traj.is_time_ordered() {
        return Err(ReportError::Schema("time column is not increasing".into()));
    }
    Ok(traj)
}

/// Where the verified trajectory came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Source {
    Simulation,
    StoredTrajectory,
}

/// Everything that goes into `report.txt`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunReport {
    pub version: String,
    pub scenario: String,
    pub scenario_hash: String,
    pub source: Source,
    pub metrics: Metrics,
    pub checks: Vec<CheckResult>,
    pub stats: Option<Stats>,
}

impl RunReport {
    pub fn new(
        scenario: &str,
        scenario_hash: &str,
        source: Source,
        metrics: Metrics,
        verification: &VerificationReport,
        stats: Option<Stats>,
    ) -> Self {
        Self {
            version: env!("CARGO_PKG_VERSION").to_string(),
            scenario: scenario.to_string(),
            scenario_hash: scenario_hash.to_string(),
            source,
            metrics,
            checks: verification.checks.clone(),
            stats,
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    /// Deterministic text rendering.
    pub fn render(&self) -> String {
        let mut s = String::new();
        let m = &self.metrics;
        let opt = |x: Option<f64>| x.map_or_else(|| "none".to_string(), |v| v.to_string());
        let source = match self.source {
            Source::Simulation => "simulation",
            Source::StoredTrajectory => "stored trajectory",
        };
        let _ = writeln!(s, "funnel-core {}", self.version);
        let _ = writeln!(s, "scenario: {}", self.scenario);
        let _ = writeln!(s, "scenario hash: {}", self.scenario_hash);
        let _ = writeln!(s, "source: {source}");
        if let Some(st) = &self.stats {
            let _ = writeln!(
                s,
                "integrator: {} accepted, {} rejected, {} retried steps, {} evaluations",
                st.accepted, st.rejected, st.retried, st.evaluations
            );
        }
        let _ = writeln!(s, "\n[metrics]");
        let _ = writeln!(s, "samples = {}", m.samples);
        let _ = writeln!(s, "eps_hat = {}", m.eps_hat);
        let _ = writeln!(s, "sat_duty = {}", m.sat_duty);
        let _ = writeln!(s, "last_sat_time = {}", opt(m.last_sat_time));
        let _ = writeln!(s, "max_abs_u = {}", m.max_abs_u);
        let _ = writeln!(s, "funnel_excess = {}", m.funnel_excess);
        let _ = writeln!(s, "desired_funnel_violations = {}", m.desired_funnel_violations);
        let _ = writeln!(s, "violations_after_saturation = {}", m.violations_after_saturation);
        let _ = writeln!(s, "\n[checks]");
        for c in &self.checks {
            let _ = writeln!(
                s,
                "{} {} (worst at t = {}): {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                opt(c.worst_t),
                c.detail
            );
        }
        let _ = writeln!(s, "\nverdict: {}", if self.passed() { "PASS" } else { "FAIL" });
        s
    }

    /// `metrics.json` contents.
    pub fn metrics_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.metrics).expect("metrics serialise");
        s.push('\n');
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> (Trajectory, ControllerParams) {
        let p = ControllerParams::new(1.5, 0.15, 3.1, vec![2.5]);
        let mut traj = Trajectory::new(2, 1);
        for n in 0..4 {
            let t = n as f64 * 0.1;
            traj.samples.push(Sample {
                t,
                y: vec![0.1 * t, 1.0 / 3.0],
                e: vec![-t, std::f64::consts::PI * t],
                psi: p.desired_funnel(t),
                k: 1.0 + t,
                v: vec![1e-300],
                u: vec![-7.999999999999999],
                kappa: 0.0,
            });
        }
        (traj, p)
    }

    #[test]
    fn header_layout() {
        assert_eq!(
            csv_header(3, 1),
            ["t", "y", "y'", "y''", "e", "e2", "e3", "psi", "psi_des", "k", "v", "u", "kappa"]
        );
        let h = csv_header(1, 2);
        assert_eq!(h, ["t", "y[0]", "y[1]", "e[0]", "e[1]", "psi", "psi_des", "k", "v[0]", "v[1]", "u[0]", "u[1]", "kappa"]);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let (traj, p) = tiny();
        let mut buf = Vec::new();
        write_csv(&mut buf, &traj, &p).unwrap();
        let back = read_csv(buf.as_slice(), 2, 1).unwrap();
        assert_eq!(back, traj);
    }

    #[test]
    fn schema_and_empty_errors() {
        let (traj, p) = tiny();
        let mut buf = Vec::new();
        write_csv(&mut buf, &traj, &p).unwrap();
        assert!(matches!(read_csv(buf.as_slice(), 3, 1), Err(ReportError::Schema(_))));
        assert!(matches!(read_csv(&b""[..], 2, 1), Err(ReportError::Empty)));
        let header_only = csv_header(2, 1).join(",") + "\n";
        assert!(matches!(read_csv(header_only.as_bytes(), 2, 1), Err(ReportError::Empty)));
        let bad = header_only + "0,1,2,3,x,5,6,7,8,9,10\n";
        assert!(matches!(read_csv(bad.as_bytes(), 2, 1), Err(ReportError::Row { row: 2, .. })));
    }

    #[test]
    fn rendering_is_stable() {
        let (traj, p) = tiny();
        let metrics = Metrics::compute(&traj, &p);
        let rep = crate::bounds::verify(&traj, &p, &crate::SaturationSpec::componentwise(8.0), &Default::default());
        let a = RunReport::new("tiny", "00", Source::Simulation, metrics.clone(), &rep, None);
        let b = RunReport::new("tiny", "00", Source::Simulation, metrics, &rep, None);
        assert_eq!(a.render(), b.render());
        assert!(a.render().contains("[checks]"));
    }
}

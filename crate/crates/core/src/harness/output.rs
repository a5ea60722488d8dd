//! Output files and their cleanup on failure.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::{AvgCheckRun, AvgCheckSummary, BatchReport};
use crate::error::Result;
use crate::vehicle::Trajectory;

pub const SUMMARY_FILE: &str = "summary.json";
pub const BOXPLOT_FILE: &str = "boxplot.csv";
pub const TRIALS_FILE: &str = "trials.csv";
pub const OVERLAY_FILE: &str = "overlay.csv";
pub const AVGCHECK_JSON_FILE: &str = "avgcheck.json";
pub const BOXPLOT_CSV_HEADER: &str = "group,min,q1,median,q3,max";

/// Files and directories created by one run, removed again unless the run
/// commits.
#[derive(Debug)]
pub struct OutputSet {
    root: PathBuf,
    files: Vec<PathBuf>,
    dirs: Vec<PathBuf>,
    committed: bool,
}

impl OutputSet {
    pub fn new(root: &Path) -> Result<Self> {
        let mut set = OutputSet { root: root.to_path_buf(), files: Vec::new(), dirs: Vec::new(), committed: false };
        set.ensure_dir(root)?;
        Ok(set)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Creates `dir` and any missing parents, remembering which were new.
    pub fn ensure_dir(&mut self, dir: &Path) -> Result<()> {
        let mut missing = Vec::new();
        let mut cur = Some(dir);
        while let Some(d) = cur {
            if d.as_os_str().is_empty() || d.exists() {
                break;
            }
            missing.push(d.to_path_buf());
            cur = d.parent();
        }
        fs::create_dir_all(dir)?;
        missing.reverse();
        self.dirs.extend(missing);
        Ok(())
    }

    pub fn track(&mut self, path: PathBuf) {
        self.files.push(path);
    }

    /// Creates `name` under the root.
    pub fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.root.join(name);
        let file = File::create(&path)?;
        self.files.push(path);
        Ok(BufWriter::new(file))
    }

    pub fn commit(&mut self) {
        self.committed = true;
    }

    pub fn rollback(&mut self) {
        for f in self.files.drain(..) {
            let _ = fs::remove_file(f);
        }
        for d in self.dirs.drain(..).rev() {
            let _ = fs::remove_dir(d);
        }
    }
}

impl Drop for OutputSet {
    fn drop(&mut self) {
        if !self.committed {
            self.rollback();
        }
    }
}

pub(crate) fn trajectory_file_name(group: usize, trial: usize) -> String {
    format!("g{group}_trial{trial:04}.csv")
}

pub(crate) fn write_trajectory(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    traj.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(outputs: &mut OutputSet, name: &str, value: &T) -> Result<()> {
    let mut out = outputs.create(name)?;
    serde_json::to_writer_pretty(&mut out, value).map_err(|e| crate::Error::Io(e.to_string()))?;
    writeln!(out)?;
    out.flush()?;
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

pub fn write_batch_outputs(outputs: &mut OutputSet, report: &BatchReport, overlay: bool) -> Result<()> {
    write_json(outputs, SUMMARY_FILE, &report.summary)?;

    let mut out = outputs.create(BOXPLOT_FILE)?;
    writeln!(out, "{BOXPLOT_CSV_HEADER}")?;
    for g in &report.summary.groups {
        let s = &g.stats;
        writeln!(
            out,
            "{},{},{},{},{},{}",
            g.group, opt(s.min_ts), opt(s.q1_ts), opt(s.median_ts), opt(s.q3_ts), opt(s.max_ts)
        )?;
    }
    out.flush()?;

    let mut out = outputs.create(TRIALS_FILE)?;
    writeln!(out, "group,trial,z1,z2,theta,ts,final_distance,outcome,reverse")?;
    for r in &report.results {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            report.summary.groups[r.group].group,
            r.trial,
            r.init.z1,
            r.init.z2,
            r.init.theta,
            opt(r.settling_time),
            r.final_distance,
            r.outcome.label(),
            r.reverse
        )?;
    }
    out.flush()?;

    if overlay {
        let mut out = outputs.create(OVERLAY_FILE)?;
        writeln!(out, "group,trial,t,z1,z2")?;
        for r in &report.results {
            let group = &report.summary.groups[r.group].group;
            for [t, z1, z2] in &r.path {
                writeln!(out, "{group},{},{t},{z1},{z2}", r.trial)?;
            }
        }
        out.flush()?;
    }
    Ok(())
}

pub fn write_avgcheck_outputs(outputs: &mut OutputSet, summary: &AvgCheckSummary, runs: &[AvgCheckRun]) -> Result<()> {
    for (i, run) in runs.iter().enumerate() {
        let name = if runs.len() == 1 { "avgcheck.csv".to_string() } else { format!("avgcheck_g{i}.csv") };
        let mut out = outputs.create(&name)?;
        run.report.write_csv(&mut out)?;
        out.flush()?;
    }
    write_json(outputs, AVGCHECK_JSON_FILE, summary)
}

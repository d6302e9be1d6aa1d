//! Artifact emission: atomic file writes, CSV formatting, and the synthesis
//! interchange file.
//!
//! All floating-point output uses nine significant digits (`{:.8e}`), which
//! keeps files byte-identical across runs of the same configuration.

use serde::{Deserialize, Serialize};
use std::io;
use std::path::Path;
use wmr_core::lmi::{LyapunovReport, PdcSynthesis, Pole};
use wmr_core::sim::{Metrics, SimTrace};

/// Nine-significant-digit rendering used by every CSV cell.
pub fn num(x: f64) -> String {
    format!("{x:.8e}")
}

/// Write `contents` to `path` atomically (temp file in the same directory,
/// then rename), so concurrent readers never observe partial files.
pub fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    std::fs::create_dir_all(dir)?;
    let tmp = tempfile::NamedTempFile::new_in(dir)?;
    std::fs::write(tmp.path(), contents)?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub const TRAJECTORY_HEADER: &str = "eta,t,x_r,y_r,theta_r,v_r,omega_r";
pub const TRACE_HEADER: &str =
    "t,x_r,y_r,theta_r,x,y,theta,e_x,e_y,e_theta,v_c,omega_c,V";
pub const POLES_HEADER: &str = "i,j,re,im,zeta";
pub const METRICS_HEADER: &str =
    "controller,ise_x,ise_y,ise_theta,ise_total,max_error,settling_time,max_cmd_rate";

pub fn trajectory_csv(traj: &wmr_core::ReferenceTrajectory) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    out.push('\n');
    for s in &traj.samples {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            num(s.eta),
            num(s.t),
            num(s.pose.x),
            num(s.pose.y),
            num(s.pose.theta),
            num(s.v),
            num(s.omega),
        ));
    }
    out
}

pub fn trace_csv(trace: &SimTrace<f64>) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for s in &trace.steps {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
            num(s.t),
            num(s.reference.x),
            num(s.reference.y),
            num(s.reference.theta),
            num(s.pose.x),
            num(s.pose.y),
            num(s.pose.theta),
            num(s.error.e_x),
            num(s.error.e_y),
            num(s.error.e_theta),
            num(s.command.v),
            num(s.command.omega),
            s.lyapunov.map(num).unwrap_or_default(),
        ));
    }
    out
}

pub fn poles_csv(poles: &[Pole<f64>]) -> String {
    let mut out = String::from(POLES_HEADER);
    out.push('\n');
    for p in poles {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            p.i,
            p.j,
            num(p.re),
            num(p.im),
            num(p.zeta),
        ));
    }
    out
}

pub fn metrics_row(name: &str, m: &Metrics<f64>) -> String {
    format!(
        "{},{},{},{},{},{},{},{}",
        name,
        num(m.ise_x),
        num(m.ise_y),
        num(m.ise_theta),
        num(m.ise_total),
        num(m.max_error),
        m.settling_time.map(num).unwrap_or_default(),
        num(m.max_cmd_rate),
    )
}

pub fn metrics_csv(rows: &[(String, Metrics<f64>)]) -> String {
    let mut out = String::from(METRICS_HEADER);
    out.push('\n');
    for (name, m) in rows {
        out.push_str(&metrics_row(name, m));
        out.push('\n');
    }
    out
}

/// Serialized synthesis result: decision variable `X`, Lyapunov matrix `P`,
/// per-rule gains `F_i` (row-major 2x3), and the certified margin.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthesisFile {
    pub controller: String,
    pub margin: f64,
    /// 3x3 row-major.
    pub x: Vec<Vec<f64>>,
    /// 3x3 row-major.
    pub p: Vec<Vec<f64>>,
    /// 16 gain matrices, each 2x3 row-major.
    pub gains: Vec<Vec<Vec<f64>>>,
}

fn rows(m: &nalgebra::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

impl SynthesisFile {
    pub fn from_synthesis(controller: &str, s: &PdcSynthesis<f64>) -> Self {
        Self {
            controller: controller.to_string(),
            margin: s.margin,
            x: rows(&s.x),
            p: rows(&s.p),
            gains: s.gains.iter().map(rows).collect(),
        }
    }

    pub fn p_matrix(&self) -> Result<nalgebra::Matrix3<f64>, String> {
        if self.p.len() != 3 || self.p.iter().any(|r| r.len() != 3) {
            return Err("synthesis file: P must be 3x3".into());
        }
        Ok(nalgebra::Matrix3::from_fn(|i, j| self.p[i][j]))
    }

    pub fn gain_matrices(&self) -> Result<Vec<nalgebra::Matrix2x3<f64>>, String> {
        if self.gains.len() != 16 {
            return Err("synthesis file: expected 16 gain matrices".into());
        }
        self.gains
            .iter()
            .map(|g| {
                if g.len() != 2 || g.iter().any(|r| r.len() != 3) {
                    return Err("synthesis file: each gain must be 2x3".into());
                }
                Ok(nalgebra::Matrix2x3::from_fn(|i, j| g[i][j]))
            })
            .collect()
    }
}

pub fn verification_report(report: &LyapunovReport<f64>, poles: &[Pole<f64>]) -> String {
    let worst_re = poles.iter().map(|p| p.re).fold(f64::NEG_INFINITY, f64::max);
    let best_re = poles.iter().map(|p| p.re).fold(f64::INFINITY, f64::min);
    format!(
        "lyapunov verification: {}\n\
         worst diagonal eigenvalue: {}\n\
         worst cross-term eigenvalue: {}\n\
         worst sampled-blend eigenvalue: {}\n\
         closed-loop poles: {} total, real parts in [{}, {}]\n",
        if report.pass { "PASS" } else { "FAIL" },
        num(report.worst_diagonal),
        num(report.worst_cross),
        num(report.worst_sampled),
        poles.len(),
        num(best_re),
        num(worst_re),
    )
}

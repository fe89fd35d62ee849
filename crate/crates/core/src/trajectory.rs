//! Sampled integration output, its JSON and CSV exports, and trajectory
//! comparison.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::algebra::RowOrder;
use crate::error::{Error, Result};
use crate::integrate::SingularityReport;
use crate::C64;

/// Version of the JSON trajectory schema.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrajectoryKind {
    WeiNorman,
    Direct,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub t: f64,
    /// Exponents in the current chart; empty for direct trajectories.
    pub u: Vec<C64>,
    /// `K(t)` in row-major order.
    pub k: Vec<C64>,
    /// `‖K†K - I‖_F`.
    pub unitarity_defect: f64,
    /// `|det K - e^{∫ tr M}|`, which is `|det K - 1|` for traceless `M`.
    pub det_defect: f64,
    /// Last accepted step before the sample; zero at the initial sample.
    pub step: f64,
    /// 0-based chart the sample was computed in.
    pub chart: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub schema_version: u32,
    pub kind: TrajectoryKind,
    #[serde(rename = "N")]
    pub n: usize,
    pub ordering: RowOrder,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub samples: Vec<Sample>,
    /// Times at which the chart was re-anchored.
    pub chart_switches: Vec<f64>,
    pub singularities: Vec<SingularityReport>,
}

impl Trajectory {
    pub fn new(kind: TrajectoryKind, n: usize, ordering: RowOrder) -> Self {
        Trajectory {
            schema_version: SCHEMA_VERSION,
            kind,
            n,
            ordering,
            seed: None,
            samples: Vec::new(),
            chart_switches: Vec::new(),
            singularities: Vec::new(),
        }
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.t).collect()
    }

    pub fn k_at(&self, i: usize) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.n, self.n, &self.samples[i].k)
    }

    pub fn max_unitarity_defect(&self) -> f64 {
        self.samples.iter().map(|s| s.unitarity_defect).fold(0.0, f64::max)
    }

    pub fn max_det_defect(&self) -> f64 {
        self.samples.iter().map(|s| s.det_defect).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value = serde_json::from_str(text)?;
        match value.get("schema_version").and_then(|v| v.as_u64()) {
            Some(v) if v == u64::from(SCHEMA_VERSION) => {}
            Some(v) => return Err(Error::Schema(format!("unsupported trajectory schema version {v}"))),
            None => return Err(Error::Schema("missing schema_version".into())),
        }
        let traj: Trajectory = serde_json::from_value(value)?;
        traj.check()?;
        Ok(traj)
    }

    fn check(&self) -> Result<()> {
        let nu = if self.kind == TrajectoryKind::Direct { 0 } else { self.n * self.n - 1 };
        for s in &self.samples {
            if s.k.len() != self.n * self.n || s.u.len() != nu {
                return Err(Error::Schema(format!("sample at t = {} has the wrong shape", s.t)));
            }
        }
        if self.samples.windows(2).any(|w| !(w[1].t > w[0].t)) {
            return Err(Error::Schema("sample times are not strictly increasing".into()));
        }
        Ok(())
    }

    /// CSV with columns `t`, `Re/Im` of each `u_i`, `Re/Im` of each `K`
    /// entry (row-major), `unitarity_defect`, `det_defect`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let nu = self.samples.first().map_or(0, |s| s.u.len());
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["t".to_string()];
        for i in 1..=nu {
            header.push(format!("re_u{i}"));
            header.push(format!("im_u{i}"));
        }
        for r in 1..=self.n {
            for c in 1..=self.n {
                header.push(format!("re_k{r}{c}"));
                header.push(format!("im_k{r}{c}"));
            }
        }
        header.push("unitarity_defect".into());
        header.push("det_defect".into());
        w.write_record(&header)?;
        for s in &self.samples {
            let mut row = vec![s.t.to_string()];
            for z in s.u.iter().chain(&s.k) {
                row.push(z.re.to_string());
                row.push(z.im.to_string());
            }
            row.push(s.unitarity_defect.to_string());
            row.push(s.det_defect.to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompareMetrics {
    pub max_frobenius: f64,
    pub rms_frobenius: f64,
    pub max_unitarity_defect_diff: f64,
    /// Samples of the first trajectory inside the time range of the second.
    pub matched: usize,
}

/// Compares `b` against `a` at the sample times of `a` that fall inside the
/// time range of `b`, interpolating `b` linearly between its samples.
pub fn compare(a: &Trajectory, b: &Trajectory) -> Result<CompareMetrics> {
    if a.n != b.n {
        return Err(Error::LengthMismatch { expected: a.n, got: b.n });
    }
    let (Some(first), Some(last)) = (b.samples.first(), b.samples.last()) else {
        return Err(Error::Config("cannot compare against an empty trajectory".into()));
    };
    let (lo, hi) = (first.t, last.t);
    let mut max_f = 0.0f64;
    let mut sum_sq = 0.0;
    let mut max_u = 0.0f64;
    let mut matched = 0;
    for s in &a.samples {
        if s.t < lo || s.t > hi {
            continue;
        }
        // Last sample of b at or before s.t.
        let j = b.samples.partition_point(|x| x.t <= s.t).saturating_sub(1);
        let (k, unitarity) = if b.samples[j].t == s.t || j + 1 == b.samples.len() {
            (b.samples[j].k.clone(), b.samples[j].unitarity_defect)
        } else {
            let (p, q) = (&b.samples[j], &b.samples[j + 1]);
            let w = (s.t - p.t) / (q.t - p.t);
            let k = p.k.iter().zip(&q.k).map(|(x, y)| x * (1.0 - w) + y * w).collect();
            (k, p.unitarity_defect * (1.0 - w) + q.unitarity_defect * w)
        };
        let d = s.k.iter().zip(&k).map(|(x, y)| (x - y).norm_sqr()).sum::<f64>().sqrt();
        max_f = max_f.max(d);
        sum_sq += d * d;
        max_u = max_u.max((s.unitarity_defect - unitarity).abs());
        matched += 1;
    }
    if matched == 0 {
        return Err(Error::Config("trajectories have disjoint time ranges".into()));
    }
    Ok(CompareMetrics {
        max_frobenius: max_f,
        rms_frobenius: (sum_sq / matched as f64).sqrt(),
        max_unitarity_defect_diff: max_u,
        matched,
    })
}

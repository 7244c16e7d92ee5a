use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossRow {
    pub frame: usize,
    pub step: u64,
    pub loss: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvalRow {
    pub frame: usize,
    pub view: usize,
    pub psnr: f64,
    pub ssim: f64,
}

/// Training losses and held-out image quality, in frame order.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MetricsLog {
    pub losses: Vec<LossRow>,
    pub evals: Vec<EvalRow>,
}

impl MetricsLog {
    /// Mean PSNR over every view of each frame, indexed by frame.
    pub fn frame_psnr(&self) -> Vec<f64> {
        let frames = self.evals.iter().map(|r| r.frame + 1).max().unwrap_or(0);
        let mut sum = vec![0.0; frames];
        let mut count = vec![0usize; frames];
        for r in &self.evals {
            sum[r.frame] += r.psnr;
            count[r.frame] += 1;
        }
        sum.iter()
            .zip(&count)
            .map(|(&s, &c)| if c == 0 { f64::NAN } else { s / c as f64 })
            .collect()
    }

    pub fn loss_csv(&self) -> String {
        let mut out = String::from("frame,step,loss\n");
        for r in &self.losses {
            let _ = writeln!(out, "{},{},{}", r.frame, r.step, r.loss);
        }
        out
    }

    pub fn eval_csv(&self) -> String {
        let mut out = String::from("frame,view,psnr,ssim\n");
        for r in &self.evals {
            let _ = writeln!(out, "{},{},{},{}", r.frame, r.view, r.psnr, r.ssim);
        }
        out
    }

    /// Writes `loss.csv` and `eval.csv` into `dir`.
    pub fn write_csv(&self, dir: &Path) -> Result<()> {
        write_text(&dir.join("loss.csv"), &self.loss_csv())?;
        write_text(&dir.join("eval.csv"), &self.eval_csv())
    }
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::WriteError {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

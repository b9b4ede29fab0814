use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowMode {
    /// `(N − w)` must be a multiple of `s`.
    Strict,
    /// Like strict, plus a final window `[N − w, N)` when the stride does
    /// not land on the end.
    Tail,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct WindowPlan {
    pub total_frames: usize,
    pub window: usize,
    pub stride: usize,
    /// half-open `[start, end)`, sorted by start
    pub windows: Vec<(usize, usize)>,
    pub coverage: Vec<usize>,
}

impl WindowPlan {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// One `p start end` line per window, then `count n`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (p, (a, b)) in self.windows.iter().enumerate() {
            s += &format!("{p} {a} {b}\n");
        }
        s += &format!("count {}\n", self.windows.len());
        s
    }
}

pub fn plan_windows(total: usize, window: usize, stride: usize, mode: WindowMode) -> Result<WindowPlan> {
    if window == 0 || window > total {
        return Err(Error::invalid("window plan", format!("need 1 ≤ w ≤ N, got w = {window}, N = {total}")));
    }
    if stride == 0 || stride > window {
        return Err(Error::invalid("window plan", format!("need 1 ≤ s ≤ w, got s = {stride}, w = {window}")));
    }
    let span = total - window;
    if mode == WindowMode::Strict && !span.is_multiple_of(stride) {
        return Err(Error::invalid("window plan", format!("(N − w) = {span} is not a multiple of s = {stride}")));
    }
    let mut windows: Vec<(usize, usize)> = (0..=span / stride).map(|p| (p * stride, p * stride + window)).collect();
    if windows.last().map(|w| w.1) != Some(total) {
        windows.push((span, total));
    }
    let mut coverage = vec![0; total];
    for &(a, b) in &windows {
        coverage[a..b].iter_mut().for_each(|c| *c += 1);
    }
    Ok(WindowPlan { total_frames: total, window, stride, windows, coverage })
}

/// Per-frame arithmetic mean over every window covering the frame. Each
/// frame is a flat vector; all frames must share one length. The running
/// mean reproduces constant inputs exactly.
pub fn overlap_average(outputs: &[Vec<Vec<f64>>], plan: &WindowPlan) -> Result<Vec<Vec<f64>>> {
    if outputs.len() != plan.windows.len() {
        return Err(Error::shape(format!("{} window outputs for {} planned windows", outputs.len(), plan.windows.len())));
    }
    let frame_len = outputs.first().and_then(|w| w.first()).map_or(0, Vec::len);
    let mut merged = vec![vec![0.0; frame_len]; plan.total_frames];
    let mut seen = vec![0usize; plan.total_frames];
    for (p, (out, &(start, end))) in outputs.iter().zip(&plan.windows).enumerate() {
        if out.len() != end - start {
            return Err(Error::shape(format!("window {p} has {} frames, expected {}", out.len(), end - start)));
        }
        for (k, frame) in out.iter().enumerate() {
            if frame.len() != frame_len {
                return Err(Error::shape(format!("window {p} frame {k} has length {}, expected {frame_len}", frame.len())));
            }
            let f = start + k;
            seen[f] += 1;
            let n = seen[f] as f64;
            for (m, x) in merged[f].iter_mut().zip(frame) {
                *m += (x - *m) / n;
            }
        }
    }
    Ok(merged)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_instance() {
        let plan = plan_windows(24, 16, 8, WindowMode::Strict).unwrap();
        assert_eq!(plan.windows, vec![(0, 16), (8, 24)]);
        assert_eq!(plan.to_text(), "0 0 16\n1 8 24\ncount 2\n");
    }

    #[test]
    fn single_window_when_n_equals_w() {
        let plan = plan_windows(16, 16, 4, WindowMode::Strict).unwrap();
        assert_eq!(plan.windows, vec![(0, 16)]);
        assert!(plan.coverage.iter().all(|&c| c == 1));
    }

    #[test]
    fn tail_mode_adds_final_window() {
        assert!(plan_windows(25, 16, 8, WindowMode::Strict).is_err());
        let plan = plan_windows(25, 16, 8, WindowMode::Tail).unwrap();
        assert_eq!(plan.windows, vec![(0, 16), (8, 24), (9, 25)]);
        assert!(plan.coverage.iter().all(|&c| c >= 1));
    }

    #[test]
    fn invalid_parameters() {
        assert!(plan_windows(10, 12, 4, WindowMode::Tail).is_err());
        assert!(plan_windows(10, 4, 5, WindowMode::Tail).is_err());
        assert!(plan_windows(10, 4, 0, WindowMode::Tail).is_err());
    }

    #[test]
    fn overlap_of_two_windows_is_the_mean() {
        let plan = plan_windows(24, 16, 8, WindowMode::Strict).unwrap();
        let outputs = vec![vec![vec![1.0]; 16], vec![vec![4.0]; 16]];
        let merged = overlap_average(&outputs, &plan).unwrap();
        assert_eq!(merged[3], vec![1.0]);
        assert_eq!(merged[8], vec![2.5]);
        assert_eq!(merged[15], vec![2.5]);
        assert_eq!(merged[20], vec![4.0]);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let plan = plan_windows(24, 16, 8, WindowMode::Strict).unwrap();
        assert!(overlap_average(&[vec![vec![0.0]; 16]], &plan).is_err());
        assert!(overlap_average(&[vec![vec![0.0]; 16], vec![vec![0.0]; 15]], &plan).is_err());
    }
}

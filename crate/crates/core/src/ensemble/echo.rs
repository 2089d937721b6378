use super::EnsembleError;
use crate::bloch::C64;
use crate::protocol::TimingPrediction;

/// Search window for one echo (μs).
#[derive(Clone, Debug, PartialEq)]
pub struct EchoWindow {
    pub label: String,
    pub t_lo: f64,
    pub t_hi: f64,
}

impl EchoWindow {
    pub fn new(label: impl Into<String>, t_lo: f64, t_hi: f64) -> Self {
        EchoWindow {
            label: label.into(),
            t_lo,
            t_hi,
        }
    }
}

/// A detected coherence burst.
#[derive(Clone, Debug, PartialEq)]
pub struct EchoEvent {
    pub t_peak: f64,
    /// P at the peak sample.
    pub amplitude: C64,
    /// |P|² at the peak sample.
    pub intensity: f64,
    /// ∫|P|² dt over the window (trapezoid, μs).
    pub energy: f64,
    pub window_label: String,
}

pub const DEFAULT_THRESHOLD: f64 = 0.05;
pub const DEFAULT_HALF_WIDTH: f64 = 3.0;

/// Per window, the largest |P|² sample if it exceeds `threshold` times the
/// global maximum of |P|².
pub fn detect_echoes(
    times: &[f64],
    p: &[C64],
    windows: &[EchoWindow],
    threshold: f64,
) -> Result<Vec<EchoEvent>, EnsembleError> {
    if times.len() != p.len() {
        return Err(EnsembleError::InvalidWindow(format!(
            "{} sample times but {} polarization values",
            times.len(),
            p.len()
        )));
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(EnsembleError::InvalidWindow(format!("threshold {threshold} outside [0, 1]")));
    }
    check_windows(times, windows)?;

    let intensity: Vec<f64> = p.iter().map(|c| c.norm_sqr()).collect();
    let global = intensity.iter().copied().fold(0.0, f64::max);
    if global == 0.0 {
        return Ok(Vec::new());
    }

    let mut events = Vec::new();
    for w in windows {
        let lo = times.partition_point(|&t| t < w.t_lo);
        let hi = times.partition_point(|&t| t <= w.t_hi);
        if lo >= hi {
            continue;
        }
        // first maximum wins on ties
        let mut best = lo;
        for k in lo..hi {
            if intensity[k] > intensity[best] {
                best = k;
            }
        }
        if intensity[best] <= threshold * global {
            continue;
        }
        let energy = (lo..hi - 1)
            .map(|k| 0.5 * (intensity[k] + intensity[k + 1]) * (times[k + 1] - times[k]))
            .sum();
        events.push(EchoEvent {
            t_peak: times[best],
            amplitude: p[best],
            intensity: intensity[best],
            energy,
            window_label: w.label.clone(),
        });
    }
    Ok(events)
}

fn check_windows(times: &[f64], windows: &[EchoWindow]) -> Result<(), EnsembleError> {
    let (first, last) = match (times.first(), times.last()) {
        (Some(&a), Some(&b)) => (a, b),
        _ if windows.is_empty() => return Ok(()),
        _ => return Err(EnsembleError::InvalidWindow("empty time series".into())),
    };
    for w in windows {
        if !(w.t_lo.is_finite() && w.t_hi.is_finite() && w.t_lo < w.t_hi) {
            return Err(EnsembleError::InvalidWindow(format!(
                "window {} has t_lo = {} >= t_hi = {}",
                w.label, w.t_lo, w.t_hi
            )));
        }
        if w.t_lo < first - 1e-9 || w.t_hi > last + 1e-9 {
            return Err(EnsembleError::InvalidWindow(format!(
                "window {} [{}, {}] lies outside the simulated span [{first}, {last}]",
                w.label, w.t_lo, w.t_hi
            )));
        }
    }
    let mut sorted: Vec<&EchoWindow> = windows.iter().collect();
    sorted.sort_by(|a, b| a.t_lo.total_cmp(&b.t_lo));
    for pair in sorted.windows(2) {
        if pair[1].t_lo < pair[0].t_hi {
            return Err(EnsembleError::InvalidWindow(format!(
                "windows {} and {} overlap",
                pair[0].label, pair[1].label
            )));
        }
    }
    Ok(())
}

fn echo_label(kind: &str, index: usize, count: usize) -> String {
    if count == 1 {
        kind.to_string()
    } else if index < 26 {
        format!("{kind}{}", (b'a' + index as u8) as char)
    } else {
        format!("{kind}.{index}")
    }
}

/// Windows centred on the predicted echoes of every data pulse.
///
/// Labels are `E1`/`E2` for a single data pulse and `E1a`, `E1b`, … for a
/// data train (letters follow data-pulse order). The half width shrinks to
/// half of the closest spacing between predicted echoes so windows stay
/// disjoint, and windows are clipped to `[t0, t1]`.
pub fn default_windows(predictions: &[TimingPrediction], half_width: f64, t0: f64, t1: f64) -> Vec<EchoWindow> {
    let n = predictions.len();
    let mut centers: Vec<(String, f64)> = Vec::new();
    for (i, p) in predictions.iter().enumerate() {
        centers.push((echo_label("E1", i, n), p.t_e1));
        if let Some(t) = p.emitted_e2() {
            centers.push((echo_label("E2", i, n), t));
        }
    }
    let mut sorted: Vec<f64> = centers.iter().map(|c| c.1).collect();
    sorted.sort_by(f64::total_cmp);
    let min_gap = sorted.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let hw = half_width.min(0.5 * min_gap);

    let mut windows: Vec<EchoWindow> = centers
        .into_iter()
        .filter_map(|(label, c)| {
            let lo = (c - hw).max(t0);
            let hi = (c + hw).min(t1);
            (lo < hi).then(|| EchoWindow::new(label, lo, hi))
        })
        .collect();
    windows.sort_by(|a, b| a.t_lo.total_cmp(&b.t_lo));
    windows
}

#[cfg(test)]
mod tests {
    use super::*;

    fn burst(center: f64, width: f64) -> (Vec<f64>, Vec<C64>) {
        let times: Vec<f64> = (0..=800).map(|k| k as f64 * 0.1).collect();
        let p = times
            .iter()
            .map(|&t| C64::new(0.0, (-(t - center).powi(2) / (2.0 * width * width)).exp()))
            .collect();
        (times, p)
    }

    #[test]
    fn zero_signal_has_no_echo() {
        let times: Vec<f64> = (0..100).map(|k| k as f64).collect();
        let p = vec![C64::new(0.0, 0.0); 100];
        let w = [EchoWindow::new("E1", 10.0, 20.0)];
        assert!(detect_echoes(&times, &p, &w, 0.05).unwrap().is_empty());
    }

    #[test]
    fn gaussian_burst_detected() {
        let (times, p) = burst(35.0, 1.5);
        let w = [EchoWindow::new("E1", 30.0, 40.0), EchoWindow::new("E2", 60.0, 70.0)];
        let events = detect_echoes(&times, &p, &w, 0.05).unwrap();
        assert_eq!(events.len(), 1);
        assert_eq!(events[0].window_label, "E1");
        assert!((events[0].t_peak - 35.0).abs() < 1e-9);
        assert!((events[0].intensity - events[0].amplitude.norm_sqr()).abs() < 1e-15);
        // ∫ exp(-(t-c)²/w²) dt = w√π
        assert!((events[0].energy - 1.5 * std::f64::consts::PI.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn malformed_windows_rejected() {
        let (times, p) = burst(35.0, 1.5);
        let overlapping = [EchoWindow::new("a", 30.0, 40.0), EchoWindow::new("b", 39.0, 45.0)];
        assert!(detect_echoes(&times, &p, &overlapping, 0.05).is_err());
        let inverted = [EchoWindow::new("a", 40.0, 30.0)];
        assert!(detect_echoes(&times, &p, &inverted, 0.05).is_err());
        let outside = [EchoWindow::new("a", 75.0, 90.0)];
        assert!(detect_echoes(&times, &p, &outside, 0.05).is_err());
    }

    #[test]
    fn windows_shrink_for_close_echoes() {
        let pred = |t_e1: f64, t_e2: f64| TimingPrediction {
            t_d: 0.0,
            t_r1: 0.0,
            t_r2: None,
            t_c1: None,
            t_c2: None,
            t_e1,
            t_e2: Some(t_e2),
            delta_t: None,
            halt_bound: None,
            halted: false,
        };
        let w = default_windows(&[pred(30.0, 70.0), pred(34.0, 66.0)], 3.0, 0.0, 80.0);
        let labels: Vec<&str> = w.iter().map(|w| w.label.as_str()).collect();
        assert_eq!(labels, ["E1a", "E1b", "E2b", "E2a"]);
        assert!((w[0].t_hi - 32.0).abs() < 1e-12);
    }
}

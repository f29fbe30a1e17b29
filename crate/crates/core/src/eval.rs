//! Frame accuracy, intersection over detection and midpoint hits.

use std::fmt::Write as _;

use crate::acv::AnchorSet;
use crate::domain::{ActionId, FrameLabeling, Segmentation};
use crate::error::{Error, Result};

/// Labeled half-open frame interval `start..end`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Interval {
    pub action: ActionId,
    pub start: usize,
    pub end: usize,
}

impl Interval {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    fn overlap(&self, other: &Interval) -> usize {
        self.end.min(other.end).saturating_sub(self.start.max(other.start))
    }

    /// Middle frame, rounding down for even lengths.
    pub fn midpoint(&self) -> usize {
        self.start + (self.len().max(1) - 1) / 2
    }
}

pub fn intervals(seg: &Segmentation) -> Vec<Interval> {
    seg.segments()
        .map(|(action, start, end)| Interval { action, start, end })
        .collect()
}

fn anchor_intervals(anchors: &AnchorSet) -> Vec<Interval> {
    anchors
        .anchors
        .iter()
        .map(|a| Interval {
            action: a.action,
            start: a.start,
            end: a.end + 1,
        })
        .collect()
}

/// Fraction of frames whose labels agree.
pub fn mof(pred: &FrameLabeling, gt: &FrameLabeling) -> Result<f64> {
    let (correct, total) = mof_counts(pred, gt)?;
    Ok(correct as f64 / total as f64)
}

fn mof_counts(pred: &FrameLabeling, gt: &FrameLabeling) -> Result<(usize, usize)> {
    if pred.len() != gt.len() {
        return Err(Error::Dimension(format!(
            "prediction has {} frames, ground truth {}",
            pred.len(),
            gt.len()
        )));
    }
    if gt.is_empty() {
        return Err(Error::InvalidInput("empty labeling".into()));
    }
    let correct = pred.labels().iter().zip(gt.labels()).filter(|(a, b)| a == b).count();
    Ok((correct, gt.len()))
}

/// Per detection: overlap with the best same-label ground-truth segment over
/// the detection's length. Returns the sum and the number of detections.
fn iod_sum(pred: &[Interval], gt: &[Interval]) -> (f64, usize) {
    let mut sum = 0.0;
    let mut count = 0;
    for d in pred.iter().filter(|d| !d.is_empty()) {
        let best = gt
            .iter()
            .filter(|g| g.action == d.action)
            .map(|g| g.overlap(d))
            .max()
            .unwrap_or(0);
        sum += best as f64 / d.len() as f64;
        count += 1;
    }
    (sum, count)
}

/// Mean intersection over detection; 0 without detections.
pub fn iod(pred: &[Interval], gt: &[Interval]) -> f64 {
    let (sum, count) = iod_sum(pred, gt);
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}

/// Detections are visited by increasing midpoint; each ground-truth segment
/// can be claimed once. Returns hits and the number of ground-truth segments.
fn midpoint_counts(pred: &[Interval], gt: &[Interval]) -> (usize, usize) {
    let mut order: Vec<&Interval> = pred.iter().filter(|d| !d.is_empty()).collect();
    order.sort_by_key(|d| (d.midpoint(), d.start, d.action));
    let mut claimed = vec![false; gt.len()];
    let mut hits = 0;
    for d in order {
        let m = d.midpoint();
        if let Some(i) = (0..gt.len()).find(|&i| !claimed[i] && gt[i].action == d.action && gt[i].start <= m && m < gt[i].end) {
            claimed[i] = true;
            hits += 1;
        }
    }
    (hits, gt.len())
}

/// Hits over ground-truth segments; 0 when there are none.
pub fn midpoint_hit(pred: &[Interval], gt: &[Interval]) -> f64 {
    let (hits, total) = midpoint_counts(pred, gt);
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

/// IoD of anchor intervals taken as detections.
pub fn anchor_iod(anchors: &AnchorSet, gt: &[Interval]) -> f64 {
    iod(&anchor_intervals(anchors), gt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Mof,
    Iod,
    Midpoint,
    All,
}

impl std::str::FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mof" => Ok(Metric::Mof),
            "iod" => Ok(Metric::Iod),
            "midpoint" => Ok(Metric::Midpoint),
            "all" => Ok(Metric::All),
            _ => Err(Error::InvalidInput(format!("unknown metric {s:?}"))),
        }
    }
}

/// Corpus-level accumulation. Mof is frame-weighted, IoD averages over all
/// detections and midpoint hits over all ground-truth segments.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Scoreboard {
    videos: usize,
    correct_frames: usize,
    total_frames: usize,
    iod_sum: f64,
    detections: usize,
    hits: usize,
    gt_segments: usize,
}

impl Scoreboard {
    pub fn add(&mut self, pred: &Segmentation, gt: &Segmentation) -> Result<()> {
        let (correct, total) = mof_counts(&pred.expand(), &gt.expand())?;
        let (p, g) = (intervals(pred), intervals(gt));
        let (sum, count) = iod_sum(&p, &g);
        let (hits, segments) = midpoint_counts(&p, &g);
        self.videos += 1;
        self.correct_frames += correct;
        self.total_frames += total;
        self.iod_sum += sum;
        self.detections += count;
        self.hits += hits;
        self.gt_segments += segments;
        Ok(())
    }

    pub fn videos(&self) -> usize {
        self.videos
    }

    pub fn mof(&self) -> f64 {
        ratio(self.correct_frames as f64, self.total_frames)
    }

    pub fn iod(&self) -> f64 {
        ratio(self.iod_sum, self.detections)
    }

    pub fn midpoint(&self) -> f64 {
        ratio(self.hits as f64, self.gt_segments)
    }

    fn rows(&self, metric: Metric) -> Vec<(&'static str, f64)> {
        let all = [("mof", self.mof()), ("iod", self.iod()), ("midpoint", self.midpoint())];
        match metric {
            Metric::Mof => vec![all[0]],
            Metric::Iod => vec![all[1]],
            Metric::Midpoint => vec![all[2]],
            Metric::All => all.to_vec(),
        }
    }

    /// Aligned plain-text table.
    pub fn table(&self, metric: Metric) -> String {
        let mut out = format!("{:<10} {:>8}\n", "metric", "value");
        for (name, v) in self.rows(metric) {
            let _ = writeln!(out, "{name:<10} {v:>8.4}");
        }
        let _ = writeln!(out, "{:<10} {:>8}", "videos", self.videos);
        out
    }

    /// `metric,value` rows with a header.
    pub fn csv(&self, metric: Metric) -> String {
        let mut out = String::from("metric,value\n");
        for (name, v) in self.rows(metric) {
            let _ = writeln!(out, "{name},{v}");
        }
        out
    }
}

fn ratio(num: f64, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num / den as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::acv::Anchor;
    use proptest::prelude::*;

    const A: ActionId = ActionId(0);
    const B: ActionId = ActionId(1);

    fn iv(action: ActionId, start: usize, end: usize) -> Interval {
        Interval { action, start, end }
    }

    fn labels(v: &[ActionId]) -> FrameLabeling {
        FrameLabeling::new(v.to_vec())
    }

    #[test]
    fn mof_examples() {
        assert_eq!(mof(&labels(&[A, A, B]), &labels(&[A, A, B])).unwrap(), 1.0);
        assert_eq!(mof(&labels(&[A, A, B, B]), &labels(&[A, B, B, B])).unwrap(), 0.75);
        assert_eq!(mof(&labels(&[A, A]), &labels(&[B, B])).unwrap(), 0.0);
        assert!(mof(&labels(&[A]), &labels(&[A, A])).is_err());
    }

    #[test]
    fn iod_examples() {
        let gt = [iv(A, 0, 10), iv(B, 10, 20)];
        assert_eq!(iod(&gt, &gt), 1.0);
        assert_eq!(iod(&[iv(A, 5, 15)], &[iv(A, 0, 10)]), 0.5);
        assert_eq!(iod(&[iv(ActionId(7), 0, 10)], &gt), 0.0);
    }

    #[test]
    fn midpoint_examples() {
        let gt = [iv(A, 0, 10), iv(B, 10, 20)];
        assert_eq!(midpoint_hit(&gt, &gt), 1.0);
        // Midpoint of 10..21 is frame 15, of 0..21 is 10: one frame outside A.
        assert_eq!(midpoint_hit(&[iv(A, 0, 21)], &[iv(A, 0, 10)]), 0.0);
        assert_eq!(midpoint_hit(&[iv(A, 0, 4), iv(A, 4, 10)], &[iv(A, 0, 10)]), 1.0);
    }

    #[test]
    fn anchor_iod_examples() {
        let gt = [iv(A, 0, 10), iv(B, 10, 20)];
        let set = |start, end, action| AnchorSet {
            anchors: vec![Anchor {
                action,
                center: start,
                start,
                end,
            }],
            alpha: 0.6,
        };
        assert_eq!(anchor_iod(&set(2, 5, A), &gt), 1.0);
        assert_eq!(anchor_iod(&set(12, 15, A), &gt), 0.0);
        assert_eq!(anchor_iod(&set(8, 11, A), &gt), 0.5);
    }

    #[test]
    fn scoreboard_weights_frames() {
        let mut s = Scoreboard::default();
        let gt1 = Segmentation::new(vec![A], vec![4]).unwrap();
        let gt2 = Segmentation::new(vec![B], vec![12]).unwrap();
        s.add(&Segmentation::new(vec![B], vec![4]).unwrap(), &gt1).unwrap();
        s.add(&gt2, &gt2).unwrap();
        assert_eq!(s.mof(), 0.75);
        assert_eq!(s.iod(), 0.5);
        assert_eq!(s.midpoint(), 0.5);
        assert!(s.table(Metric::All).contains("mof"));
        assert_eq!(s.csv(Metric::Mof), "metric,value\nmof,0.75\n");
    }

    fn arb_segmentation() -> impl Strategy<Value = Segmentation> {
        proptest::collection::vec((0usize..4, 1usize..10), 1..8).prop_map(|parts| {
            let (a, l): (Vec<_>, Vec<_>) = parts.into_iter().map(|(c, l)| (ActionId(c), l)).unzip();
            Segmentation::new(a, l).unwrap()
        })
    }

    proptest! {
        #[test]
        fn self_comparison_is_perfect(seg in arb_segmentation()) {
            let p = intervals(&seg);
            prop_assert_eq!(iod(&p, &p), 1.0);
            prop_assert_eq!(midpoint_hit(&p, &p), 1.0);
            prop_assert_eq!(mof(&seg.expand(), &seg.expand()).unwrap(), 1.0);
        }

        #[test]
        fn metrics_bounded_and_order_free(a in arb_segmentation(), b in arb_segmentation()) {
            let (p, g) = (intervals(&a), intervals(&b));
            let mut rp = p.clone();
            rp.reverse();
            let mut rg = g.clone();
            rg.reverse();
            for v in [iod(&p, &g), midpoint_hit(&p, &g)] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert!((iod(&p, &g) - iod(&rp, &rg)).abs() < 1e-12);
            prop_assert_eq!(midpoint_hit(&p, &g), midpoint_hit(&rp, &rg));
        }
    }
}

use crate::acv::SaliencyMatrix;
use crate::domain::ActionId;
use crate::error::{Error, Result};

/// Default anchor length as a fraction of the expected action length.
pub const DEFAULT_ALPHA: f64 = 0.6;

/// Salient interval of one action, `start..=end` inclusive.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Anchor {
    pub action: ActionId,
    pub center: usize,
    pub start: usize,
    pub end: usize,
}

impl Anchor {
    pub fn overlaps(&self, other: &Anchor) -> bool {
        self.start <= other.end && other.start <= self.end
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// One anchor per action of the ground-truth set, pairwise disjoint, sorted
/// by center.
#[derive(Debug, Clone, PartialEq)]
pub struct AnchorSet {
    pub anchors: Vec<Anchor>,
    /// Fraction actually used; smaller than requested after a fallback.
    pub alpha: f64,
}

impl AnchorSet {
    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }
}

/// Picks each action's most salient frame as the center of an interval of
/// half-width `floor(alpha * lambda_c / 2)`. Overlaps are resolved by moving
/// the less salient anchor of a conflict to its next-best center that clears
/// every other anchor. If no disjoint assignment is found, `alpha` is halved
/// and the selection retried.
///
/// `lambdas` is indexed by class id.
pub fn select_anchors(saliency: &SaliencyMatrix, lambdas: &[f64], alpha: f64, frames: usize) -> Result<AnchorSet> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::InvalidInput(format!("alpha {alpha} outside (0, 1]")));
    }
    if saliency.frames() != frames || frames == 0 {
        return Err(Error::Dimension(format!(
            "saliency has {} frames, video has {frames}",
            saliency.frames()
        )));
    }
    if saliency.rows() == 0 {
        return Err(Error::InvalidInput("saliency matrix has no rows".into()));
    }
    if let Some(c) = saliency.classes.iter().find(|c| c.0 >= lambdas.len()) {
        return Err(Error::Dimension(format!("no expected length for class {c}")));
    }
    let rankings: Vec<Vec<usize>> = saliency
        .values
        .rows()
        .into_iter()
        .map(|row| {
            let mut order: Vec<usize> = (0..frames).collect();
            // Stable sort keeps the earliest frame first among equal values.
            order.sort_by(|&a, &b| row[b].total_cmp(&row[a]));
            order
        })
        .collect();

    let mut alpha = alpha;
    loop {
        let half: Vec<usize> = saliency
            .classes
            .iter()
            .map(|c| (alpha * lambdas[c.0] / 2.0).floor().max(0.0) as usize)
            .collect();
        if let Some(anchors) = try_assign(saliency, &rankings, &half, frames) {
            return Ok(AnchorSet { anchors, alpha });
        }
        if half.iter().all(|&h| h == 0) {
            return Err(Error::AnchorsInfeasible { frames });
        }
        alpha /= 2.0;
    }
}

fn interval(center: usize, half: usize, frames: usize) -> (usize, usize) {
    (center.saturating_sub(half), (center + half).min(frames - 1))
}

fn try_assign(saliency: &SaliencyMatrix, rankings: &[Vec<usize>], half: &[usize], frames: usize) -> Option<Vec<Anchor>> {
    let rows = rankings.len();
    let mut rank = vec![0usize; rows];
    let make = |r: usize, center: usize| {
        let (start, end) = interval(center, half[r], frames);
        Anchor {
            action: saliency.classes[r],
            center,
            start,
            end,
        }
    };
    let mut anchors: Vec<Anchor> = (0..rows).map(|r| make(r, rankings[r][0])).collect();
    loop {
        // Among all anchors involved in a conflict, the least salient one moves.
        let mover = (0..rows)
            .filter(|&r| (0..rows).any(|o| o != r && anchors[r].overlaps(&anchors[o])))
            .min_by(|&a, &b| {
                let sa = saliency.values[[a, anchors[a].center]];
                let sb = saliency.values[[b, anchors[b].center]];
                sa.total_cmp(&sb).then(b.cmp(&a))
            });
        let Some(r) = mover else { break };
        loop {
            rank[r] += 1;
            let &center = rankings[r].get(rank[r])?;
            let candidate = make(r, center);
            if (0..rows).all(|o| o == r || !candidate.overlaps(&anchors[o])) {
                anchors[r] = candidate;
                break;
            }
        }
    }
    anchors.sort_by_key(|a| a.center);
    Some(anchors)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::Array2;

    fn matrix(rows: Vec<Vec<f64>>) -> SaliencyMatrix {
        let m = rows.len();
        let t = rows[0].len();
        SaliencyMatrix {
            classes: (0..m).map(ActionId).collect(),
            values: Array2::from_shape_vec((m, t), rows.concat()).unwrap(),
        }
    }

    fn peaks(frames: usize, peaks: &[(usize, f64)]) -> Vec<f64> {
        let mut row = vec![0.0; frames];
        for &(t, v) in peaks {
            row[t] = v;
        }
        row
    }

    #[test]
    fn single_action_takes_global_argmax() {
        let s = matrix(vec![peaks(50, &[(7, 2.0), (31, 5.0)])]);
        let a = select_anchors(&s, &[10.0], 0.6, 50).unwrap();
        assert_eq!(a.anchors.len(), 1);
        assert_eq!(a.anchors[0].center, 31);
        assert_eq!((a.anchors[0].start, a.anchors[0].end), (28, 34));
    }

    #[test]
    fn disjoint_peaks_keep_their_intervals() {
        let s = matrix(vec![peaks(300, &[(10, 1.0)]), peaks(300, &[(200, 1.0)])]);
        // alpha * lambda / 2 = 5 for both.
        let a = select_anchors(&s, &[10.0, 10.0], 1.0, 300).unwrap();
        assert_eq!((a.anchors[0].start, a.anchors[0].end), (5, 15));
        assert_eq!((a.anchors[1].start, a.anchors[1].end), (195, 205));
        assert_eq!(a.alpha, 1.0);
    }

    #[test]
    fn conflict_moves_less_salient_anchor() {
        // Both peak at 50, a higher; b's runner-up is 120, then 55 which still
        // collides with a.
        let a_row = peaks(300, &[(50, 9.0), (130, 1.0)]);
        let b_row = peaks(300, &[(50, 6.0), (55, 5.0), (120, 4.0)]);
        let s = matrix(vec![a_row, b_row]);
        let set = select_anchors(&s, &[20.0, 20.0], 0.5, 300).unwrap();
        let by_action = |c: usize| set.anchors.iter().find(|x| x.action == ActionId(c)).unwrap();
        assert_eq!(by_action(0).center, 50);
        assert_eq!(by_action(1).center, 120);
        assert_eq!((by_action(1).start, by_action(1).end), (115, 125));
    }

    #[test]
    fn intervals_clamped_at_borders() {
        let s = matrix(vec![peaks(20, &[(1, 1.0)]), peaks(20, &[(19, 1.0)])]);
        let a = select_anchors(&s, &[8.0, 8.0], 1.0, 20).unwrap();
        assert_eq!((a.anchors[0].start, a.anchors[0].end), (0, 5));
        assert_eq!((a.anchors[1].start, a.anchors[1].end), (15, 19));
    }

    #[test]
    fn short_video_halves_alpha() {
        // Two anchors of half-width 5 cannot fit in 12 frames.
        let s = matrix(vec![peaks(12, &[(3, 2.0)]), peaks(12, &[(8, 1.0)])]);
        let a = select_anchors(&s, &[10.0, 10.0], 1.0, 12).unwrap();
        assert!(a.alpha < 1.0);
        assert!(!a.anchors[0].overlaps(&a.anchors[1]));
    }

    #[test]
    fn impossible_assignment_is_error() {
        let s = matrix(vec![vec![1.0], vec![2.0]]);
        assert!(matches!(
            select_anchors(&s, &[1.0, 1.0], 0.6, 1),
            Err(Error::AnchorsInfeasible { frames: 1 })
        ));
    }

    #[test]
    fn rejects_bad_alpha() {
        let s = matrix(vec![vec![1.0, 2.0]]);
        assert!(select_anchors(&s, &[1.0], 0.0, 2).is_err());
        assert!(select_anchors(&s, &[1.0], 1.5, 2).is_err());
    }
}

//! Consensus alert times, reaction-time statistics and ego-involvement counts.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::data::{AnnotatorMark, Outcome, SourceDataset, VideoRecord};
use crate::error::{Error, Result};
use crate::prep::filter_insufficient_horizon;
use crate::stats::{mean, midpoint_median, nearest_rank, sample_sd, sorted_copy};

pub const REPORTED_PERCENTILES: [u32; 4] = [5, 50, 90, 95];

/// Median of the annotators' marks for one video.
pub fn consensus_alert_time(marks: &[AnnotatorMark]) -> Result<f64> {
    let first = marks
        .first()
        .ok_or_else(|| Error::invalid("no annotator marks"))?;
    if let Some(other) = marks.iter().find(|m| m.video_id != first.video_id) {
        return Err(Error::invalid(format!(
            "marks mix videos `{}` and `{}`",
            first.video_id, other.video_id
        )));
    }
    let times: Vec<f64> = marks.iter().map(|m| m.t_mark).collect();
    midpoint_median(&times)
}

/// Groups marks by video (first-appearance order) and takes the consensus of each.
pub fn consensus_by_video(marks: &[AnnotatorMark]) -> Result<indexmap::IndexMap<String, f64>> {
    let mut grouped: indexmap::IndexMap<String, Vec<AnnotatorMark>> = indexmap::IndexMap::new();
    for m in marks {
        grouped
            .entry(m.video_id.clone())
            .or_default()
            .push(m.clone());
    }
    grouped
        .into_iter()
        .map(|(id, ms)| Ok((id, consensus_alert_time(&ms)?)))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReactionStats {
    pub n: usize,
    pub skipped: usize,
    pub median_s: f64,
    pub mean_s: f64,
    pub sd_s: f64,
    pub min_s: f64,
    pub max_s: f64,
    /// Nearest-rank percentiles keyed by percent.
    pub percentiles: BTreeMap<u32, f64>,
    /// `(reaction_s, cumulative_fraction)` at each distinct reaction value.
    pub cdf: Vec<(f64, f64)>,
}

/// Statistics of `t_event - t_alert` over records that carry both times.
pub fn reaction_time_stats(records: &[VideoRecord]) -> Result<ReactionStats> {
    let reactions: Vec<f64> = records.iter().filter_map(VideoRecord::reaction_s).collect();
    let skipped = records.len() - reactions.len();
    if reactions.is_empty() {
        return Err(Error::invalid(
            "no record has both an alert and an event time",
        ));
    }
    let sorted = sorted_copy(&reactions);
    let n = sorted.len();
    let mut percentiles = BTreeMap::new();
    for p in REPORTED_PERCENTILES {
        percentiles.insert(p, nearest_rank(&sorted, f64::from(p))?);
    }
    let mut cdf: Vec<(f64, f64)> = Vec::new();
    for (i, &v) in sorted.iter().enumerate() {
        let frac = (i + 1) as f64 / n as f64;
        match cdf.last_mut() {
            Some(last) if last.0 == v => last.1 = frac,
            _ => cdf.push((v, frac)),
        }
    }
    Ok(ReactionStats {
        n,
        skipped,
        median_s: percentiles[&50],
        mean_s: mean(&sorted),
        sd_s: sample_sd(&sorted),
        min_s: sorted[0],
        max_s: sorted[n - 1],
        percentiles,
        cdf,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgoInvolvementRow {
    pub dataset: String,
    pub n_pos_ego: usize,
    pub n_pos_not_ego: usize,
    pub n_less_horizon: usize,
    pub n_negative: usize,
    pub pct_not_ego: f64,
    /// Set when the dataset has no retained positives and the percentage is a placeholder.
    pub no_positives: bool,
}

impl EgoInvolvementRow {
    pub fn from_counts(
        dataset: impl Into<String>,
        n_pos_ego: usize,
        n_pos_not_ego: usize,
        n_less_horizon: usize,
        n_negative: usize,
    ) -> Self {
        let total = n_pos_ego + n_pos_not_ego;
        Self {
            dataset: dataset.into(),
            n_pos_ego,
            n_pos_not_ego,
            n_less_horizon,
            n_negative,
            pct_not_ego: percent_half_up(n_pos_not_ego, total),
            no_positives: total == 0,
        }
    }
}

/// `100 * num / den` rounded half-up to one decimal, in exact integer arithmetic.
pub fn percent_half_up(num: usize, den: usize) -> f64 {
    if den == 0 {
        return 0.0;
    }
    let (num, den) = (num as u128, den as u128);
    let tenths = (2000 * num + den) / (2 * den);
    tenths as f64 / 10.0
}

/// One row per source dataset (sorted by dataset), counting positives removed by
/// the horizon filter separately from the retained ones.
pub fn ego_involvement_table(records: &[VideoRecord], horizon_s: f64) -> Vec<EgoInvolvementRow> {
    let mut by_dataset: BTreeMap<SourceDataset, Vec<VideoRecord>> = BTreeMap::new();
    for r in records {
        by_dataset
            .entry(r.source_dataset)
            .or_default()
            .push(r.clone());
    }
    by_dataset
        .into_iter()
        .map(|(dataset, recs)| {
            let (kept, removed) = filter_insufficient_horizon(&recs, horizon_s);
            let count = |o: Outcome| kept.iter().filter(|r| r.outcome == o).count();
            EgoInvolvementRow::from_counts(
                dataset.as_str(),
                count(Outcome::PositiveEgo),
                count(Outcome::PositiveNonEgo),
                removed.len(),
                count(Outcome::Negative),
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::Split;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn marks(times: &[f64]) -> Vec<AnnotatorMark> {
        times
            .iter()
            .enumerate()
            .map(|(i, &t)| AnnotatorMark {
                video_id: "v".into(),
                annotator_id: format!("a{i}"),
                t_mark: t,
            })
            .collect()
    }

    fn reaction_record(id: usize, reaction: f64) -> VideoRecord {
        VideoRecord {
            video_id: format!("v{id}"),
            source_dataset: SourceDataset::Nexar,
            duration_s: 30.0,
            fps: 30.0,
            outcome: Outcome::PositiveEgo,
            t_alert: Some(20.0 - reaction),
            t_event: Some(20.0),
            category: None,
            split: Some(Split::Test),
            note: None,
        }
    }

    #[test]
    fn consensus_examples() {
        assert_eq!(consensus_alert_time(&marks(&[1.0])).unwrap(), 1.0);
        assert_eq!(
            consensus_alert_time(&marks(&[1.0, 2.0, 10.0])).unwrap(),
            2.0
        );
        assert!(consensus_alert_time(&[]).is_err());
        let mut mixed = marks(&[1.0, 2.0]);
        mixed[1].video_id = "w".into();
        assert!(consensus_alert_time(&mixed).is_err());
    }

    #[test]
    fn consensus_of_ten_matches_sort_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100 {
            let times: Vec<f64> = (0..10).map(|_| rng.random_range(0.0..8.0)).collect();
            let mut sorted = times.clone();
            sorted.sort_by(f64::total_cmp);
            let oracle = (sorted[4] + sorted[5]) / 2.0;
            assert_eq!(consensus_alert_time(&marks(&times)).unwrap(), oracle);
        }
    }

    proptest! {
        #[test]
        fn consensus_permutation_and_translation(
            times in prop::collection::vec(0.0f64..20.0, 1..15),
            shift in 0.0f64..5.0,
            seed in any::<u64>(),
        ) {
            let base = consensus_alert_time(&marks(&times)).unwrap();
            let mut shuffled = times.clone();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rand::seq::SliceRandom::shuffle(shuffled.as_mut_slice(), &mut rng);
            prop_assert_eq!(consensus_alert_time(&marks(&shuffled)).unwrap(), base);
            let moved: Vec<f64> = times.iter().map(|t| t + shift).collect();
            let got = consensus_alert_time(&marks(&moved)).unwrap();
            prop_assert!((got - (base + shift)).abs() < 1e-9);
        }

        #[test]
        fn reaction_stats_properties(reactions in prop::collection::vec(0.01f64..8.0, 1..80)) {
            let recs: Vec<_> = reactions.iter().enumerate().map(|(i, &r)| reaction_record(i, r)).collect();
            let s = reaction_time_stats(&recs).unwrap();
            prop_assert_eq!(s.median_s, s.percentiles[&50]);
            prop_assert!(s.min_s <= s.mean_s + 1e-12 && s.mean_s <= s.max_s + 1e-12);
            prop_assert!(s.sd_s >= 0.0);
            prop_assert_eq!(s.cdf.last().unwrap().1, 1.0);
            for w in s.cdf.windows(2) {
                prop_assert!(w[0].0 < w[1].0 && w[0].1 <= w[1].1);
            }
            // brute-force nearest rank over the recomputed reactions
            let mut sorted: Vec<f64> = recs.iter().map(|r| r.reaction_s().unwrap()).collect();
            sorted.sort_by(f64::total_cmp);
            for p in REPORTED_PERCENTILES {
                let k = ((p as f64 / 100.0 * sorted.len() as f64) - 1e-9).ceil().max(1.0) as usize;
                prop_assert_eq!(s.percentiles[&p], sorted[k - 1]);
            }
        }
    }

    #[test]
    fn reaction_stats_small() {
        let recs: Vec<_> = [1.0, 2.0, 3.0]
            .iter()
            .enumerate()
            .map(|(i, &r)| reaction_record(i, r))
            .collect();
        let s = reaction_time_stats(&recs).unwrap();
        assert_eq!(s.n, 3);
        assert_eq!(s.median_s, 2.0);
        assert_eq!(s.mean_s, 2.0);
        assert_eq!(s.sd_s, 1.0);
    }

    #[test]
    fn reaction_stats_skips_and_errors() {
        let mut recs = vec![reaction_record(0, 1.0)];
        let mut no_alert = reaction_record(1, 1.0);
        no_alert.t_alert = None;
        recs.push(no_alert.clone());
        let s = reaction_time_stats(&recs).unwrap();
        assert_eq!((s.n, s.skipped), (1, 1));
        assert!(reaction_time_stats(&[no_alert]).is_err());
    }

    #[test]
    fn table_one_percentages() {
        assert_eq!(
            EgoInvolvementRow::from_counts("DAD", 13, 150, 2, 301).pct_not_ego,
            92.0
        );
        assert_eq!(
            EgoInvolvementRow::from_counts("DADA2000", 75, 51, 2, 0).pct_not_ego,
            40.5
        );
        assert_eq!(
            EgoInvolvementRow::from_counts("DoTA", 327, 255, 16, 0).pct_not_ego,
            43.8
        );
        let nexar = EgoInvolvementRow::from_counts("Nexar", 672, 0, 0, 672);
        assert_eq!(nexar.pct_not_ego, 0.0);
        assert!(!nexar.no_positives);
        let empty = EgoInvolvementRow::from_counts("x", 0, 0, 0, 10);
        assert!(empty.no_positives && empty.pct_not_ego == 0.0);
    }

    #[test]
    fn half_up_rounding() {
        assert_eq!(percent_half_up(1, 8), 12.5);
        assert_eq!(percent_half_up(1, 16), 6.3); // 6.25 -> 6.3
        assert_eq!(percent_half_up(1, 3), 33.3);
        assert_eq!(percent_half_up(2, 3), 66.7);
    }

    proptest! {
        #[test]
        fn table_percent_recomputes(ego in 0usize..2000, not_ego in 0usize..2000) {
            let row = EgoInvolvementRow::from_counts("d", ego, not_ego, 0, 0);
            prop_assert_eq!(row.pct_not_ego, percent_half_up(row.n_pos_not_ego, row.n_pos_ego + row.n_pos_not_ego));
            if ego + not_ego > 0 {
                let exact = 100.0 * not_ego as f64 / (ego + not_ego) as f64;
                prop_assert!((row.pct_not_ego - exact).abs() <= 0.05 + 1e-9);
            }
        }
    }

    #[test]
    fn table_counts_horizon_removals() {
        let mut recs = Vec::new();
        let mut early = reaction_record(0, 0.5);
        early.t_event = Some(1.5);
        early.t_alert = Some(1.0);
        recs.push(early);
        recs.push(reaction_record(1, 1.0));
        let mut non_ego = reaction_record(2, 1.0);
        non_ego.outcome = Outcome::PositiveNonEgo;
        recs.push(non_ego);
        let rows = ego_involvement_table(&recs, 2.0);
        assert_eq!(rows.len(), 1);
        let r = &rows[0];
        assert_eq!((r.n_pos_ego, r.n_pos_not_ego, r.n_less_horizon), (1, 1, 1));
        assert_eq!(r.pct_not_ego, 50.0);
    }
}

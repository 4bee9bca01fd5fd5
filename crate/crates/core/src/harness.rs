//! Evaluation harness: rank correlation against human ratings, ablations,
//! per-model leaderboards and per-category breakdowns.

use std::collections::{BTreeMap, HashMap};
use std::fmt::{self, Write as _};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::features::{Category, HumanRatingRecord, ScoreReport};

/// Human rating dimension.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dimension {
    Acs,
    Mss,
}

impl Dimension {
    pub const ALL: [Dimension; 2] = [Dimension::Acs, Dimension::Mss];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Acs => "ACS",
            Dimension::Mss => "MSS",
        }
    }

    fn of(self, r: &HumanRatingRecord) -> f64 {
        match self {
            Dimension::Acs => r.acs,
            Dimension::Mss => r.mss,
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A score column of [`ScoreReport`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ScoreField {
    SPrior,
    SAnatRaw,
    SAnatNorm,
    QAnat,
    SLocalNorm,
    SGlobalNorm,
    SMot,
    QMot,
}

impl ScoreField {
    pub fn as_str(self) -> &'static str {
        match self {
            ScoreField::SPrior => "s_prior",
            ScoreField::SAnatRaw => "s_anat_raw",
            ScoreField::SAnatNorm => "s_anat_norm",
            ScoreField::QAnat => "q_anat",
            ScoreField::SLocalNorm => "s_local_norm",
            ScoreField::SGlobalNorm => "s_global_norm",
            ScoreField::SMot => "s_mot",
            ScoreField::QMot => "q_mot",
        }
    }

    pub fn of(self, r: &ScoreReport) -> f64 {
        match self {
            ScoreField::SPrior => r.s_prior,
            ScoreField::SAnatRaw => r.s_anat_raw,
            ScoreField::SAnatNorm => r.s_anat_norm,
            ScoreField::QAnat => r.q_anat,
            ScoreField::SLocalNorm => r.s_local_norm,
            ScoreField::SGlobalNorm => r.s_global_norm,
            ScoreField::SMot => r.s_mot,
            ScoreField::QMot => r.q_mot,
        }
    }

    pub fn is_fused(self) -> bool {
        matches!(self, ScoreField::QAnat | ScoreField::QMot)
    }
}

impl fmt::Display for ScoreField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Average (fractional) ranks, 1-based; exactly equal values share a rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i + 1;
        while j < order.len() && values[order[j]] == values[order[i]] {
            j += 1;
        }
        // Positions i..j (0-based) share the mean of ranks i+1..=j.
        let rank = (i + j + 1) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = rank;
        }
        i = j;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (da, db) = (a - mx, b - my);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

/// Spearman's rank correlation with average ranks for ties.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.len(),
            right: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::UndefinedCorrelation(format!(
            "need at least 2 samples, got {}",
            x.len()
        )));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::Input("non-finite value in correlation input".into()));
    }
    pearson(&average_ranks(x), &average_ranks(y))
        .ok_or_else(|| Error::UndefinedCorrelation("constant input vector".into()))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationResult {
    pub metric_name: String,
    pub dimension: Dimension,
    pub rho: f64,
    pub n: usize,
    /// `None` for the pooled computation, else the model the rows were restricted to.
    pub model_id: Option<String>,
}

#[derive(Debug, Clone, Default)]
pub struct CorrelateOptions {
    /// Emit component rows (prior, anatomical, motion alone) next to the fused scores.
    pub ablation: bool,
    /// Skip rated videos without a report instead of failing.
    pub allow_missing: bool,
    /// Additionally compute ρ within each model (not part of the pooled protocol).
    pub per_model: bool,
    /// Explicit pairs; empty means the default pairing.
    pub pairs: Vec<(ScoreField, Dimension)>,
}

#[derive(Debug, Clone, Default)]
pub struct CorrelationOutput {
    pub results: Vec<CorrelationResult>,
    /// Rated video ids that had no report (only with `allow_missing`).
    pub missing: Vec<String>,
    /// Pairs whose ρ is undefined (constant scores or ratings).
    pub undefined: Vec<(String, Dimension, Option<String>)>,
}

pub fn default_pairs() -> Vec<(ScoreField, Dimension)> {
    vec![
        (ScoreField::QAnat, Dimension::Acs),
        (ScoreField::QMot, Dimension::Mss),
    ]
}

/// Component grid: each single factor next to both fused scores, for each
/// dimension.
pub fn ablation_pairs() -> Vec<(ScoreField, Dimension)> {
    let fields = [
        ScoreField::SPrior,
        ScoreField::SAnatNorm,
        ScoreField::SMot,
        ScoreField::QAnat,
        ScoreField::QMot,
    ];
    Dimension::ALL
        .into_iter()
        .flat_map(|d| fields.into_iter().map(move |f| (f, d)))
        .collect()
}

type Joined<'a> = (&'a ScoreReport, &'a HumanRatingRecord);

/// Joins reports and ratings on `video_id` and computes ρ per pair.
pub fn correlate(
    reports: &[ScoreReport],
    ratings: &[HumanRatingRecord],
    opts: &CorrelateOptions,
) -> Result<CorrelationOutput> {
    let by_id: HashMap<&str, &ScoreReport> =
        reports.iter().map(|r| (r.video_id.as_str(), r)).collect();
    let mut joined: Vec<Joined> = Vec::new();
    let mut missing = Vec::new();
    for rating in ratings {
        match by_id.get(rating.video_id.as_str()) {
            Some(report) => joined.push((report, rating)),
            None => missing.push(rating.video_id.clone()),
        }
    }
    missing.sort();
    if !missing.is_empty() && !opts.allow_missing {
        return Err(Error::MissingReports(missing));
    }

    let mut pairs = if opts.pairs.is_empty() {
        if opts.ablation {
            ablation_pairs()
        } else {
            default_pairs()
        }
    } else {
        opts.pairs.clone()
    };
    if opts.ablation && !opts.pairs.is_empty() {
        for p in ablation_pairs() {
            if !pairs.contains(&p) {
                pairs.push(p);
            }
        }
    }

    let mut scopes: Vec<(Option<String>, Vec<Joined>)> = vec![(None, joined.clone())];
    if opts.per_model {
        let mut groups: BTreeMap<&str, Vec<Joined>> = BTreeMap::new();
        for &(rep, rat) in &joined {
            groups
                .entry(rat.model_id.as_str())
                .or_default()
                .push((rep, rat));
        }
        scopes.extend(
            groups
                .into_iter()
                .map(|(m, rows)| (Some(m.to_owned()), rows)),
        );
    }

    let mut out = CorrelationOutput {
        missing,
        ..Default::default()
    };
    for (scope, rows) in &scopes {
        for &(field, dim) in &pairs {
            let xs: Vec<f64> = rows.iter().map(|(rep, _)| field.of(rep)).collect();
            let ys: Vec<f64> = rows.iter().map(|(_, rat)| dim.of(rat)).collect();
            match spearman_rho(&xs, &ys) {
                Ok(rho) => out.results.push(CorrelationResult {
                    metric_name: field.as_str().to_owned(),
                    dimension: dim,
                    rho,
                    n: xs.len(),
                    model_id: scope.clone(),
                }),
                Err(Error::UndefinedCorrelation(_)) => {
                    out.undefined
                        .push((field.as_str().to_owned(), dim, scope.clone()))
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

pub fn correlations_csv(results: &[CorrelationResult]) -> String {
    let mut out = String::from("scope,metric,dimension,rho,n\n");
    for r in results {
        let _ = writeln!(
            out,
            "{},{},{},{:.3},{}",
            r.model_id.as_deref().unwrap_or("pooled"),
            r.metric_name,
            r.dimension,
            r.rho,
            r.n
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeaderboardRow {
    pub model_id: String,
    pub q_anat: f64,
    pub q_mot: f64,
    pub n: usize,
}

/// Resolves each report's model: the rating's model when ratings are given,
/// else the report's own `model_id`, else `"unknown"`.
fn model_of<'a>(
    report: &'a ScoreReport,
    ratings: &'a HashMap<&str, &HumanRatingRecord>,
) -> &'a str {
    ratings
        .get(report.video_id.as_str())
        .map(|r| r.model_id.as_str())
        .or(report.model_id.as_deref())
        .unwrap_or("unknown")
}

fn index_ratings(ratings: &[HumanRatingRecord]) -> HashMap<&str, &HumanRatingRecord> {
    ratings.iter().map(|r| (r.video_id.as_str(), r)).collect()
}

#[derive(Default, Clone, Copy)]
struct Acc {
    anat: f64,
    mot: f64,
    n: usize,
}

impl Acc {
    fn add(&mut self, r: &ScoreReport) {
        self.anat += r.q_anat;
        self.mot += r.q_mot;
        self.n += 1;
    }
}

/// Per-model mean Q_Anat and Q_Mot, sorted by Q_Mot descending (model id
/// breaks ties).
pub fn leaderboard(reports: &[ScoreReport], ratings: &[HumanRatingRecord]) -> Vec<LeaderboardRow> {
    let index = index_ratings(ratings);
    let mut groups: BTreeMap<&str, Vec<&ScoreReport>> = BTreeMap::new();
    for r in reports {
        groups.entry(model_of(r, &index)).or_default().push(r);
    }
    let mut rows: Vec<LeaderboardRow> = groups
        .into_iter()
        .map(|(model, mut members)| {
            // Fixed summation order keeps means independent of input order.
            members.sort_by(|a, b| a.video_id.cmp(&b.video_id));
            let mut acc = Acc::default();
            members.iter().for_each(|r| acc.add(r));
            LeaderboardRow {
                model_id: model.to_owned(),
                q_anat: acc.anat / acc.n as f64,
                q_mot: acc.mot / acc.n as f64,
                n: acc.n,
            }
        })
        .collect();
    rows.sort_by(|a, b| {
        b.q_mot
            .total_cmp(&a.q_mot)
            .then_with(|| a.model_id.cmp(&b.model_id))
    });
    rows
}

pub fn leaderboard_csv(rows: &[LeaderboardRow]) -> String {
    let mut out = String::from("rank,model_id,q_anat,q_mot,n\n");
    for (i, r) in rows.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{:.3},{:.3},{}",
            i + 1,
            r.model_id,
            r.q_anat,
            r.q_mot,
            r.n
        );
    }
    out
}

pub fn leaderboard_table(rows: &[LeaderboardRow]) -> String {
    let width = rows
        .iter()
        .map(|r| r.model_id.len())
        .max()
        .unwrap_or(0)
        .max("Model".len());
    let mut out = format!(
        "{:<4} {:<width$} {:>7} {:>7} {:>5}\n",
        "#", "Model", "Q_Anat", "Q_Mot", "n"
    );
    for (i, r) in rows.iter().enumerate() {
        let _ = writeln!(
            out,
            "{:<4} {:<width$} {:>7.3} {:>7.3} {:>5}",
            i + 1,
            r.model_id,
            r.q_anat,
            r.q_mot,
            r.n
        );
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct CategoryRow {
    pub category: Category,
    pub model_id: String,
    pub q_anat: f64,
    pub q_mot: f64,
    pub n: usize,
}

/// Per-category, per-model mean Q_Anat and Q_Mot. Categories come from the
/// ratings, falling back to the report's own category.
pub fn category_breakdown(
    reports: &[ScoreReport],
    ratings: &[HumanRatingRecord],
) -> Result<Vec<CategoryRow>> {
    let index = index_ratings(ratings);
    let mut sorted: Vec<&ScoreReport> = reports.iter().collect();
    sorted.sort_by(|a, b| a.video_id.cmp(&b.video_id));
    let mut groups: BTreeMap<(Category, &str), Acc> = BTreeMap::new();
    for r in sorted {
        let category = index
            .get(r.video_id.as_str())
            .map(|rat| rat.category)
            .or(r.category)
            .ok_or_else(|| Error::Input(format!("no category known for video {}", r.video_id)))?;
        groups
            .entry((category, model_of(r, &index)))
            .or_default()
            .add(r);
    }
    Ok(groups
        .into_iter()
        .map(|((category, model), acc)| CategoryRow {
            category,
            model_id: model.to_owned(),
            q_anat: acc.anat / acc.n as f64,
            q_mot: acc.mot / acc.n as f64,
            n: acc.n,
        })
        .collect())
}

pub fn categories_csv(rows: &[CategoryRow]) -> String {
    let mut out = String::from("category,model_id,q_anat,q_mot,n\n");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{:.3},{:.3},{}",
            r.category, r.model_id, r.q_anat, r.q_mot, r.n
        );
    }
    out
}

#[derive(Serialize)]
struct PlotSeries {
    model_id: String,
    q_anat: Vec<Option<f64>>,
    q_mot: Vec<Option<f64>>,
}

#[derive(Serialize)]
struct PlotData {
    categories: Vec<&'static str>,
    series: Vec<PlotSeries>,
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

/// Plot-ready JSON: one series per model, values aligned with `categories`.
pub fn category_plot_json(rows: &[CategoryRow]) -> String {
    let models: Vec<&str> = {
        let mut m: Vec<&str> = rows.iter().map(|r| r.model_id.as_str()).collect();
        m.sort();
        m.dedup();
        m
    };
    let series = models
        .into_iter()
        .map(|model| {
            let lookup = |c: Category| rows.iter().find(|r| r.category == c && r.model_id == model);
            PlotSeries {
                model_id: model.to_owned(),
                q_anat: Category::ALL
                    .iter()
                    .map(|&c| lookup(c).map(|r| round3(r.q_anat)))
                    .collect(),
                q_mot: Category::ALL
                    .iter()
                    .map(|&c| lookup(c).map(|r| round3(r.q_mot)))
                    .collect(),
            }
        })
        .collect();
    let data = PlotData {
        categories: Category::ALL.iter().map(|c| c.as_str()).collect(),
        series,
    };
    let mut text = serde_json::to_string_pretty(&data).expect("plot data serialize");
    text.push('\n');
    text
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn report(id: &str, model: &str, q_anat: f64, q_mot: f64) -> ScoreReport {
        ScoreReport {
            video_id: id.into(),
            model_id: Some(model.into()),
            category: None,
            s_prior: 1.0,
            s_anat_raw: q_anat,
            s_anat_norm: q_anat,
            q_anat,
            s_local_raw: 1.0,
            s_local_norm: 1.0,
            s_global_raw: 1.0,
            s_global_norm: q_mot,
            s_mot: q_mot,
            q_mot,
            flags: vec![],
        }
    }

    fn rating(id: &str, model: &str, cat: Category, acs: f64, mss: f64) -> HumanRatingRecord {
        HumanRatingRecord {
            video_id: id.into(),
            model_id: model.into(),
            category: cat,
            acs,
            mss,
        }
    }

    #[test]
    fn perfect_agreement_and_reversal() {
        assert_eq!(
            spearman_rho(&[1.0, 2.0, 3.0], &[10.0, 20.0, 30.0]).unwrap(),
            1.0
        );
        assert_eq!(
            spearman_rho(&[1.0, 2.0, 3.0], &[30.0, 20.0, 10.0]).unwrap(),
            -1.0
        );
    }

    #[test]
    fn spearman_errors() {
        assert!(matches!(
            spearman_rho(&[1.0, 2.0], &[1.0]),
            Err(Error::LengthMismatch { left: 2, right: 1 })
        ));
        assert!(matches!(
            spearman_rho(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]),
            Err(Error::UndefinedCorrelation(_))
        ));
        assert!(spearman_rho(&[1.0], &[1.0]).is_err());
    }

    #[test]
    fn ranks_with_ties() {
        assert_eq!(
            average_ranks(&[3.0, 1.0, 3.0, 2.0, 3.0]),
            vec![4.0, 1.0, 4.0, 2.0, 4.0]
        );
        assert_eq!(average_ranks(&[5.0, 5.0]), vec![1.5, 1.5]);
    }

    #[test]
    fn identical_ordering_gives_one() {
        let reports: Vec<_> = (0..6)
            .map(|i| report(&format!("v{i}"), "m", 0.1 * i as f64, 0.5))
            .collect();
        let ratings: Vec<_> = (0..6)
            .map(|i| {
                rating(
                    &format!("v{i}"),
                    "m",
                    Category::Hoi,
                    1.0 + 0.5 * i as f64,
                    3.0 + (i % 2) as f64,
                )
            })
            .collect();
        let out = correlate(&reports, &ratings, &CorrelateOptions::default()).unwrap();
        assert_eq!(out.results.len(), 1);
        assert_eq!(out.results[0].rho, 1.0);
        assert_eq!(out.results[0].dimension, Dimension::Acs);
        // q_mot is constant, so its pairing is reported as undefined.
        assert_eq!(
            out.undefined,
            vec![("q_mot".to_owned(), Dimension::Mss, None)]
        );
    }

    #[test]
    fn cardinality_of_explicit_pairs() {
        let reports: Vec<_> = (0..100)
            .map(|i| {
                let mut r = report(
                    &format!("v{i}"),
                    "m",
                    (i % 17) as f64 / 17.0,
                    (i % 13) as f64 / 13.0,
                );
                r.s_prior = (i % 7) as f64 / 7.0;
                r.s_anat_norm = (i % 11) as f64 / 11.0;
                r
            })
            .collect();
        let ratings: Vec<_> = (0..100)
            .map(|i| {
                rating(
                    &format!("v{i}"),
                    "m",
                    Category::Hhi,
                    1.0 + (i % 5) as f64,
                    1.0 + (i % 3) as f64,
                )
            })
            .collect();
        let pairs = [
            ScoreField::SPrior,
            ScoreField::SAnatNorm,
            ScoreField::QAnat,
            ScoreField::QMot,
        ]
        .into_iter()
        .flat_map(|f| Dimension::ALL.into_iter().map(move |d| (f, d)))
        .collect();
        let out = correlate(
            &reports,
            &ratings,
            &CorrelateOptions {
                pairs,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(out.results.len(), 8);
    }

    #[test]
    fn ablation_shape() {
        let reports: Vec<_> = (0..10)
            .map(|i| {
                let mut r = report(
                    &format!("v{i}"),
                    "m",
                    (i * 7 % 10) as f64 / 10.0,
                    (i * 3 % 10) as f64 / 10.0,
                );
                r.s_prior = (i * 9 % 10) as f64 / 10.0;
                r
            })
            .collect();
        let ratings: Vec<_> = (0..10)
            .map(|i| {
                rating(
                    &format!("v{i}"),
                    "m",
                    Category::Hoi,
                    1.0 + (i % 4) as f64,
                    1.0 + (i % 3) as f64,
                )
            })
            .collect();
        let opts = CorrelateOptions {
            ablation: true,
            ..Default::default()
        };
        let out = correlate(&reports, &ratings, &opts).unwrap();
        for dim in Dimension::ALL {
            let rows: Vec<_> = out.results.iter().filter(|r| r.dimension == dim).collect();
            let components = rows
                .iter()
                .filter(|r| !r.metric_name.starts_with("q_"))
                .count();
            let fused = rows
                .iter()
                .filter(|r| r.metric_name.starts_with("q_"))
                .count();
            assert_eq!((components, fused), (3, 2));
        }
    }

    #[test]
    fn missing_reports() {
        let reports = vec![report("a", "m", 0.5, 0.5), report("b", "m", 0.6, 0.4)];
        let ratings = vec![
            rating("a", "m", Category::Hoi, 2.0, 3.0),
            rating("b", "m", Category::Hoi, 3.0, 2.0),
            rating("zz", "m", Category::Hoi, 3.0, 2.0),
        ];
        let err = correlate(&reports, &ratings, &CorrelateOptions::default()).unwrap_err();
        assert!(matches!(&err, Error::MissingReports(ids) if ids == &vec!["zz".to_owned()]));
        let out = correlate(
            &reports,
            &ratings,
            &CorrelateOptions {
                allow_missing: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(out.missing, vec!["zz".to_owned()]);
        assert_eq!(out.results.len(), 2);
        assert_eq!(out.results[0].n, 2);
    }

    #[test]
    fn per_model_scopes() {
        let reports: Vec<_> = (0..8)
            .map(|i| {
                report(
                    &format!("v{i}"),
                    if i < 4 { "a" } else { "b" },
                    i as f64 / 8.0,
                    1.0 - i as f64 / 8.0,
                )
            })
            .collect();
        let ratings: Vec<_> = (0..8)
            .map(|i| {
                rating(
                    &format!("v{i}"),
                    if i < 4 { "a" } else { "b" },
                    Category::Hoi,
                    1.0 + i as f64 / 2.0,
                    1.0 + i as f64 / 2.0,
                )
            })
            .collect();
        let out = correlate(
            &reports,
            &ratings,
            &CorrelateOptions {
                per_model: true,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(out.results.len(), 6);
        let csv = correlations_csv(&out.results);
        assert!(csv.starts_with("scope,metric,dimension,rho,n\npooled,q_anat,ACS,1.000,8\n"));
        assert!(csv.contains("a,q_mot,MSS,-1.000,4"));
    }

    #[test]
    fn leaderboard_mean_and_order() {
        let reports = vec![
            report("a1", "alpha", 0.7, 0.3),
            report("a2", "alpha", 0.9, 0.5),
            report("b1", "beta", 0.2, 0.9),
        ];
        let rows = leaderboard(&reports, &[]);
        assert_eq!(rows.len(), 2);
        assert_eq!(rows[0].model_id, "beta");
        assert_eq!(rows[1].model_id, "alpha");
        assert!((rows[1].q_anat - 0.8).abs() < 1e-15);
        assert_eq!(rows[1].n, 2);
        let csv = leaderboard_csv(&rows);
        assert_eq!(
            csv,
            "rank,model_id,q_anat,q_mot,n\n1,beta,0.200,0.900,1\n2,alpha,0.800,0.400,2\n"
        );
        let table = leaderboard_table(&rows);
        assert!(table.lines().nth(2).unwrap().contains("alpha"));
    }

    #[test]
    fn leaderboard_uses_rating_models() {
        let mut r = report("x", "ignored", 0.5, 0.5);
        r.model_id = None;
        let rows = leaderboard(&[r.clone()], &[]);
        assert_eq!(rows[0].model_id, "unknown");
        let rows = leaderboard(&[r], &[rating("x", "wan", Category::Hoi, 3.0, 3.0)]);
        assert_eq!(rows[0].model_id, "wan");
    }

    #[test]
    fn single_category_partition() {
        let reports = vec![report("a", "m", 0.4, 0.6), report("b", "m", 0.6, 0.8)];
        let ratings = vec![
            rating("a", "m", Category::Hoi, 3.0, 3.0),
            rating("b", "m", Category::Hoi, 3.0, 3.0),
        ];
        let rows = category_breakdown(&reports, &ratings).unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0].category, Category::Hoi);
        assert!((rows[0].q_anat - 0.5).abs() < 1e-15);
    }

    #[test]
    fn four_categories_two_models() {
        let mut reports = Vec::new();
        let mut ratings = Vec::new();
        for (ci, cat) in Category::ALL.into_iter().enumerate() {
            for model in ["m1", "m2"] {
                for k in 0..3 {
                    let id = format!("{cat}-{model}-{k}");
                    let v = (ci * 3 + k) as f64 / 20.0;
                    reports.push(report(&id, model, v, 1.0 - v));
                    ratings.push(rating(&id, model, cat, 3.0, 3.0));
                }
            }
        }
        let rows = category_breakdown(&reports, &ratings).unwrap();
        assert_eq!(rows.len(), 8);
        // Brute-force group-by.
        for row in &rows {
            let members: Vec<&ScoreReport> = reports
                .iter()
                .filter(|r| {
                    r.video_id
                        .starts_with(&format!("{}-{}-", row.category, row.model_id))
                })
                .collect();
            let mean = members.iter().map(|r| r.q_anat).sum::<f64>() / members.len() as f64;
            assert!((row.q_anat - mean).abs() < 1e-12);
            assert_eq!(row.n, 3);
        }
        let plot: serde_json::Value = serde_json::from_str(&category_plot_json(&rows)).unwrap();
        assert_eq!(plot["categories"].as_array().unwrap().len(), 4);
        assert_eq!(plot["series"].as_array().unwrap().len(), 2);
        assert!(categories_csv(&rows).lines().count() == 9);
    }

    #[test]
    fn unknown_category_is_error() {
        let mut r = report("a", "m", 0.4, 0.6);
        r.category = None;
        assert!(category_breakdown(&[r], &[]).is_err());
    }

    proptest! {
        #[test]
        fn self_correlation_is_one(x in prop::collection::vec(-100.0..100.0f64, 2..40)) {
            prop_assume!(x.iter().any(|v| *v != x[0]));
            prop_assert_eq!(spearman_rho(&x, &x).unwrap(), 1.0);
        }

        #[test]
        fn symmetric(x in prop::collection::vec(0i32..6, 3..30), y in prop::collection::vec(0i32..6, 3..30)) {
            let n = x.len().min(y.len());
            let xs: Vec<f64> = x[..n].iter().map(|&v| v as f64).collect();
            let ys: Vec<f64> = y[..n].iter().map(|&v| v as f64).collect();
            if let (Ok(a), Ok(b)) = (spearman_rho(&xs, &ys), spearman_rho(&ys, &xs)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }

        #[test]
        fn leaderboard_permutation_invariant(vals in prop::collection::vec((0.0..1.0f64, 0.0..1.0f64, 0usize..3), 1..30), shift in 0usize..30) {
            let reports: Vec<_> = vals.iter().enumerate()
                .map(|(i, &(a, m, g))| report(&format!("v{i:03}"), ["x", "y", "z"][g], a, m)).collect();
            let mut shuffled = reports.clone();
            let len = shuffled.len();
            shuffled.rotate_left(shift % len);
            shuffled.reverse();
            prop_assert_eq!(leaderboard(&reports, &[]), leaderboard(&shuffled, &[]));
        }
    }
}

//! Top-k accuracy harness for comparing priors, plus baseline hyperparameter
//! sweeps and a rank-based AUC for the synthetic verifier.

use crate::encoder::SpatioTemporalPoint;
use crate::error::{Error, Result};
use crate::inference::{combine, PriorSource};

/// Fraction of examples whose true label ranks among the `k` largest
/// posterior entries; ties broken by lowest category id.
pub fn topk_accuracy(posteriors: &[Vec<f64>], labels: &[usize], k: usize) -> Result<f64> {
    if posteriors.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} posteriors vs {} labels",
            posteriors.len(),
            labels.len()
        )));
    }
    if posteriors.is_empty() {
        return Err(Error::Config("no examples to score".into()));
    }
    let categories = posteriors[0].len();
    if k == 0 || k > categories {
        return Err(Error::Config(format!(
            "top-k rank {k} out of range for {categories} categories"
        )));
    }
    let mut hits = 0usize;
    for (row, &label) in posteriors.iter().zip(labels) {
        if row.len() != categories {
            return Err(Error::Shape("ragged posterior rows".into()));
        }
        let target = row[label];
        // rank = entries strictly greater, plus equal entries with lower id
        let mut rank = 0usize;
        for (i, &v) in row.iter().enumerate() {
            if v > target || (v == target && i < label) {
                rank += 1;
            }
        }
        if rank < k {
            hits += 1;
        }
    }
    Ok(hits as f64 / labels.len() as f64)
}

/// Area under the ROC curve via the rank statistic, with tied scores
/// receiving their average rank.
pub fn roc_auc(scores: &[f64], positives: &[bool]) -> Result<f64> {
    if scores.len() != positives.len() {
        return Err(Error::Shape("scores and labels differ in length".into()));
    }
    let pos = positives.iter().filter(|&&p| p).count();
    let neg = positives.len() - pos;
    if pos == 0 || neg == 0 {
        return Err(Error::Config(
            "AUC needs at least one positive and one negative".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // ranks are 1-based; ties share the average rank of their run
        let avg_rank = (i + 1 + j + 1) as f64 / 2.0;
        for &idx in &order[i..=j] {
            if positives[idx] {
                rank_sum += avg_rank;
            }
        }
        i = j + 1;
    }
    Ok((rank_sum - (pos * (pos + 1)) as f64 / 2.0) / (pos as f64 * neg as f64))
}

/// One evaluation example: an optional location, the true label, and the
/// classifier's score vector aligned to the prior's vocabulary.
#[derive(Debug, Clone)]
pub struct EvalExample {
    pub point: Option<SpatioTemporalPoint>,
    pub label: usize,
    pub scores: Vec<f64>,
}

/// Accuracy summary for one prior.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalRow {
    pub name: String,
    pub top1: f64,
    pub top3: f64,
    pub top5: f64,
}

/// Rows for every compared prior over one shared example set.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    pub examples: usize,
    pub config_echo: String,
}

impl EvalReport {
    /// Aligned, human-readable table.
    pub fn to_text_table(&self) -> String {
        let name_width = self
            .rows
            .iter()
            .map(|r| r.name.len())
            .max()
            .unwrap_or(5)
            .max(5);
        let mut out = format!(
            "{:<name_width$}  {:>7}  {:>7}  {:>7}\n",
            "prior", "top1", "top3", "top5"
        );
        for row in &self.rows {
            out.push_str(&format!(
                "{:<name_width$}  {:>7.4}  {:>7.4}  {:>7.4}\n",
                row.name, row.top1, row.top3, row.top5
            ));
        }
        out.push_str(&format!(
            "examples: {}  ({})\n",
            self.examples, self.config_echo
        ));
        out
    }

    /// Machine-readable CSV.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("prior,top1,top3,top5,examples\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{:.6},{:.6},{:.6},{}\n",
                row.name, row.top1, row.top3, row.top5, self.examples
            ));
        }
        out
    }
}

fn accuracy_row(name: String, posteriors: &[Vec<f64>], labels: &[usize]) -> Result<EvalRow> {
    let categories = posteriors.first().map(|p| p.len()).unwrap_or(0);
    // clamp the rank to C so small-vocabulary runs still report all columns
    let k_or_max = |k: usize| topk_accuracy(posteriors, labels, k.min(categories));
    Ok(EvalRow {
        name,
        top1: k_or_max(1)?,
        top3: k_or_max(3)?,
        top5: k_or_max(5)?,
    })
}

/// Compare priors on a shared example set. A uniform row (classifier alone)
/// is always included first; examples without a location fall back to the
/// uniform prior under every source.
pub fn compare_priors(
    examples: &[EvalExample],
    priors: &[&dyn PriorSource],
    config_echo: &str,
) -> Result<EvalReport> {
    if examples.is_empty() {
        return Err(Error::Config("no evaluation examples".into()));
    }
    let categories = examples[0].scores.len();
    for source in priors {
        if source.categories() != categories {
            return Err(Error::Vocabulary(format!(
                "prior '{}' has {} categories but scores have {}",
                source.name(),
                source.categories(),
                categories
            )));
        }
    }
    let labels: Vec<usize> = examples.iter().map(|e| e.label).collect();

    let mut rows = Vec::with_capacity(priors.len() + 1);
    let uniform_posteriors: Vec<Vec<f64>> = examples
        .iter()
        .map(|e| combine(&e.scores, None).map(|(p, _)| p))
        .collect::<Result<_>>()?;
    rows.push(accuracy_row("uniform".into(), &uniform_posteriors, &labels)?);

    for source in priors {
        let posteriors: Vec<Vec<f64>> = examples
            .iter()
            .map(|e| {
                let prior = e.point.as_ref().map(|p| source.prior_at(p));
                combine(&e.scores, prior.as_deref()).map(|(p, _)| p)
            })
            .collect::<Result<_>>()?;
        rows.push(accuracy_row(source.name(), &posteriors, &labels)?);
    }
    Ok(EvalReport {
        rows,
        examples: examples.len(),
        config_echo: config_echo.to_string(),
    })
}

/// Pick the candidate with the best validation top-1; ties keep the first.
pub fn sweep(candidates: &[&dyn PriorSource], validation: &[EvalExample]) -> Result<usize> {
    if candidates.is_empty() {
        return Err(Error::Config("sweep needs at least one candidate".into()));
    }
    if validation.is_empty() {
        return Err(Error::Config("sweep needs a non-empty validation split".into()));
    }
    let labels: Vec<usize> = validation.iter().map(|e| e.label).collect();
    let mut best = 0usize;
    let mut best_top1 = -1.0f64;
    for (i, source) in candidates.iter().enumerate() {
        let posteriors: Vec<Vec<f64>> = validation
            .iter()
            .map(|e| {
                let prior = e.point.as_ref().map(|p| source.prior_at(p));
                combine(&e.scores, prior.as_deref()).map(|(p, _)| p)
            })
            .collect::<Result<_>>()?;
        let top1 = topk_accuracy(&posteriors, &labels, 1)?;
        if top1 > best_top1 {
            best_top1 = top1;
            best = i;
        }
    }
    Ok(best)
}

//! Decision-level and feature-level combination of per-modality outputs.
//!
//! Three late-fusion strategies: per-sample majority voting with a fallback
//! modality when all models disagree, a grid-searched two-model weighted sum,
//! and a three-model weighted sum whose simplex weights are found by
//! Dirichlet sampling. Early fusion concatenates feature tables before
//! normalization. The MM1 metric reports the relative gain of a fusion
//! system over its best constituent.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::eval;
use crate::types::{ClassSet, FeatureMatrix, Modality, ProbMatrix};

/// One model's decisions on a shared sample set.
#[derive(Debug, Clone, PartialEq)]
pub struct ModalityOutput {
    modality: Modality,
    probs: ProbMatrix,
    labels: Vec<usize>,
    dev_uar: Option<f64>,
}

impl ModalityOutput {
    /// Labels are derived as the per-row argmax of `probs`.
    pub fn new(modality: Modality, probs: ProbMatrix, dev_uar: Option<f64>) -> Self {
        let labels = probs.argmax_labels();
        Self {
            modality,
            probs,
            labels,
            dev_uar,
        }
    }

    pub fn modality(&self) -> &Modality {
        &self.modality
    }

    pub fn probs(&self) -> &ProbMatrix {
        &self.probs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn dev_uar(&self) -> Option<f64> {
        self.dev_uar
    }
}

/// Per-sample majority vote over exactly three modalities. When all three
/// disagree, the fallback modality's label is assigned.
pub fn majority_vote(outputs: &[ModalityOutput], fallback: &Modality) -> Result<Vec<usize>> {
    if outputs.len() != 3 {
        return Err(Error::InvalidParam(format!(
            "majority voting takes exactly 3 modality outputs, got {}",
            outputs.len()
        )));
    }
    let n = outputs[0].labels.len();
    if outputs.iter().any(|o| o.labels.len() != n) {
        return Err(Error::DimensionMismatch(
            "modality outputs cover different sample counts".into(),
        ));
    }
    let fallback_output = outputs
        .iter()
        .find(|o| &o.modality == fallback)
        .ok_or_else(|| {
            Error::InvalidParam(format!("fallback modality {fallback} not among outputs"))
        })?;

    let mut fused = Vec::with_capacity(n);
    for i in 0..n {
        let (a, b, c) = (outputs[0].labels[i], outputs[1].labels[i], outputs[2].labels[i]);
        let label = if a == b || a == c {
            a
        } else if b == c {
            b
        } else {
            fallback_output.labels[i]
        };
        fused.push(label);
    }
    Ok(fused)
}

/// Convex blend of two probability matrices: `alpha * p1 + (1 - alpha) * p2`.
pub fn blend_pair(p1: &ProbMatrix, p2: &ProbMatrix, alpha: f64) -> Result<ProbMatrix> {
    if p1.nrows() != p2.nrows() || p1.nclasses() != p2.nclasses() {
        return Err(Error::DimensionMismatch(format!(
            "blend inputs are {}x{} and {}x{}",
            p1.nrows(),
            p1.nclasses(),
            p2.nrows(),
            p2.nclasses()
        )));
    }
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidParam(format!("alpha {alpha} outside [0, 1]")));
    }
    ProbMatrix::new(p1.values() * alpha + p2.values() * (1.0 - alpha))
}

/// Convex blend of three probability matrices with simplex weights.
pub fn blend_three(
    p1: &ProbMatrix,
    p2: &ProbMatrix,
    p3: &ProbMatrix,
    w: &DirichletWeights,
) -> Result<ProbMatrix> {
    let same = |a: &ProbMatrix, b: &ProbMatrix| {
        a.nrows() == b.nrows() && a.nclasses() == b.nclasses()
    };
    if !same(p1, p2) || !same(p1, p3) {
        return Err(Error::DimensionMismatch(
            "three-way blend inputs disagree on shape".into(),
        ));
    }
    ProbMatrix::new(
        p1.values() * w.alphas[0] + p2.values() * w.alphas[1] + p3.values() * w.alphas[2],
    )
}

/// Selects the blend coefficient maximizing UAR against `dev_labels`
/// (smallest alpha on ties) and returns it with the blended matrix.
pub fn weighted_sum2(
    p1: &ProbMatrix,
    p2: &ProbMatrix,
    alpha_grid: &[f64],
    dev_labels: &[usize],
    classes: &ClassSet,
) -> Result<(f64, ProbMatrix)> {
    if alpha_grid.is_empty() {
        return Err(Error::InvalidParam("alpha grid is empty".into()));
    }
    if alpha_grid.iter().any(|a| !(0.0..=1.0).contains(a)) {
        return Err(Error::InvalidParam("alpha grid values outside [0, 1]".into()));
    }
    if !alpha_grid.contains(&0.0) || !alpha_grid.contains(&1.0) {
        return Err(Error::InvalidParam(
            "alpha grid must contain both endpoints 0 and 1".into(),
        ));
    }
    if dev_labels.len() != p1.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} probability rows",
            dev_labels.len(),
            p1.nrows()
        )));
    }
    let mut best: Option<(f64, f64)> = None; // (uar, alpha)
    for &alpha in alpha_grid {
        let blend = blend_pair(p1, p2, alpha)?;
        let uar = eval::uar_of_labels(dev_labels, &blend.argmax_labels(), classes)?;
        let better = match best {
            None => true,
            Some((u, a)) => uar > u || (uar == u && alpha < a),
        };
        if better {
            best = Some((uar, alpha));
        }
    }
    let (_, alpha) = best.expect("alpha grid is nonempty");
    Ok((alpha, blend_pair(p1, p2, alpha)?))
}

/// A point on the 3-simplex: positive components summing to one.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirichletWeights {
    pub alphas: [f64; 3],
}

impl DirichletWeights {
    pub fn new(alphas: [f64; 3]) -> Result<Self> {
        if alphas.iter().any(|&a| !(a > 0.0 && a < 1.0)) {
            return Err(Error::InvalidParam(format!(
                "simplex weights must lie strictly inside (0, 1), got {alphas:?}"
            )));
        }
        let sum: f64 = alphas.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidParam(format!(
                "simplex weights sum to {sum}, expected 1"
            )));
        }
        Ok(Self { alphas })
    }

    pub fn uniform() -> Self {
        Self {
            alphas: [1.0 / 3.0; 3],
        }
    }
}

/// Draws symmetric Dirichlet(1, 1, 1) samples, i.e. uniform points on the
/// 3-simplex, as three unit-rate exponential draws normalized by their sum.
/// Deterministic for a fixed seed.
pub fn sample_dirichlet(n_draws: usize, seed: u64) -> Vec<DirichletWeights> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n_draws);
    while out.len() < n_draws {
        let mut e = [0.0f64; 3];
        for v in e.iter_mut() {
            let u: f64 = rng.random();
            *v = -(1.0 - u).ln();
        }
        let sum: f64 = e.iter().sum();
        if sum == 0.0 {
            continue;
        }
        let alphas = [e[0] / sum, e[1] / sum, e[2] / sum];
        // Degenerate draws (a component rounding to exactly 0 or 1) are
        // rejected so every sample lies strictly inside the simplex.
        match DirichletWeights::new(alphas) {
            Ok(w) => out.push(w),
            Err(_) => continue,
        }
    }
    out
}

/// Draws `n_draws` simplex weights, evaluates each blend's UAR against
/// `dev_labels`, and returns the first-best draw with its blended matrix.
pub fn weighted_sum3_search(
    p1: &ProbMatrix,
    p2: &ProbMatrix,
    p3: &ProbMatrix,
    dev_labels: &[usize],
    classes: &ClassSet,
    n_draws: usize,
    seed: u64,
) -> Result<(DirichletWeights, ProbMatrix)> {
    if n_draws == 0 {
        return Err(Error::InvalidParam("need at least one Dirichlet draw".into()));
    }
    if dev_labels.len() != p1.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} probability rows",
            dev_labels.len(),
            p1.nrows()
        )));
    }
    // All draws come from one seeded stream before evaluation, so the search
    // result does not depend on evaluation order.
    let draws = sample_dirichlet(n_draws, seed);
    let mut best: Option<(f64, DirichletWeights)> = None;
    for w in draws {
        let blend = blend_three(p1, p2, p3, &w)?;
        let uar = eval::uar_of_labels(dev_labels, &blend.argmax_labels(), classes)?;
        if best.map_or(true, |(u, _)| uar > u) {
            best = Some((uar, w));
        }
    }
    let (_, weights) = best.expect("at least one draw");
    Ok((weights, blend_three(p1, p2, p3, &weights)?))
}

/// Column-wise concatenation of feature tables sharing the same samples in
/// the same order. Normalization is applied afterwards by the caller.
pub fn early_fuse(matrices: &[FeatureMatrix]) -> Result<FeatureMatrix> {
    let first = matrices
        .first()
        .ok_or_else(|| Error::EmptyInput("no feature tables to fuse".into()))?;
    for m in &matrices[1..] {
        if m.nrows() != first.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "feature tables have {} and {} rows",
                first.nrows(),
                m.nrows()
            )));
        }
        if m.sample_ids() != first.sample_ids() {
            return Err(Error::InvalidParam(
                "feature tables disagree on sample id order".into(),
            ));
        }
    }
    let total: usize = matrices.iter().map(|m| m.ncols()).sum();
    let mut values = Array2::<f64>::zeros((first.nrows(), total));
    let mut names = Vec::with_capacity(total);
    let mut offset = 0;
    for m in matrices {
        values
            .slice_mut(ndarray::s![.., offset..offset + m.ncols()])
            .assign(m.values());
        names.extend(m.column_names().iter().cloned());
        offset += m.ncols();
    }
    for (i, a) in names.iter().enumerate() {
        if names[i + 1..].contains(a) {
            return Err(Error::InvalidParam(format!(
                "duplicate feature name {a:?} after concatenation; prefix sources first"
            )));
        }
    }
    FeatureMatrix::new(values, names, first.sample_ids().to_vec())
}

/// Relative improvement of a fusion system over its best unimodal
/// constituent: `(uar_fusion - max_i uar_i) / max_i uar_i`.
pub fn mm1(uar_fusion: f64, unimodal_uars: &[f64]) -> Result<f64> {
    if unimodal_uars.is_empty() {
        return Err(Error::EmptyInput("no unimodal UAR scores".into()));
    }
    for &u in unimodal_uars.iter().chain(std::iter::once(&uar_fusion)) {
        if !(u > 0.0 && u <= 1.0) {
            return Err(Error::InvalidParam(format!(
                "UAR scores must lie in (0, 1], got {u}"
            )));
        }
    }
    let best = unimodal_uars.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok((uar_fusion - best) / best)
}

//! Priors over optimal arms and mean-reward vectors.
//!
//! The prior over the sequence of optimal arms factorizes through the chain
//! rule; every provider here is order-1 (the next optimal arm depends on the
//! previous one only). Given a distribution over the next optimal arm, the
//! prior over the mean-reward vector is a J-component Gaussian mixture.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{check_arm, Error, Result};
use crate::posterior::MixturePosterior;

/// Source of the distribution over the next task's optimal arm.
pub trait PriorProvider {
    fn num_arms(&self) -> usize;

    /// Distribution of the first optimal arm.
    fn initial_dist(&self) -> Vec<f64>;

    /// Distribution of the next optimal arm given the previous one.
    fn next_dist(&self, prev: usize) -> Result<Vec<f64>>;

    /// Distribution for task `m` given the previous optimal arm, if any.
    fn dist_given(&self, prev: Option<usize>) -> Result<Vec<f64>> {
        match prev {
            None => Ok(self.initial_dist()),
            Some(p) => self.next_dist(p),
        }
    }
}

/// Checks that `dist` is a probability vector within `tol`.
pub fn validate_distribution(dist: &[f64], tol: f64) -> Result<()> {
    if dist.is_empty() {
        return Err(Error::InvalidDistribution("empty support".into()));
    }
    if let Some(x) = dist.iter().find(|x| !x.is_finite() || **x < 0.0) {
        return Err(Error::InvalidDistribution(format!("entry {x} is not a probability")));
    }
    let s: f64 = dist.iter().sum();
    if (s - 1.0).abs() > tol {
        return Err(Error::InvalidDistribution(format!("entries sum to {s}")));
    }
    Ok(())
}

/// Shannon entropy in nats, with `0 ln 0 = 0`.
pub fn conditional_entropy(dist: &[f64]) -> Result<f64> {
    if let Some(x) = dist.iter().find(|x| **x < 0.0 || x.is_nan()) {
        return Err(Error::InvalidDistribution(format!("negative entry {x}")));
    }
    validate_distribution(dist, 1e-9)?;
    Ok(dist
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.ln())
        .sum::<f64>()
        .max(0.0))
}

/// Cyclic-successor prior: the next optimal arm follows the previous one
/// with probability `p`, and is otherwise uniform over the remaining arms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MarkovPrior {
    p: f64,
    n_arms: usize,
}

impl MarkovPrior {
    pub fn new(p: f64, n_arms: usize) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::invalid("p", format!("{p} not in [0, 1]")));
        }
        if n_arms < 2 {
            return Err(Error::invalid("num_arms", "need at least two arms"));
        }
        Ok(Self { p, n_arms })
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    pub fn successor(&self, prev: usize) -> usize {
        (prev + 1) % self.n_arms
    }
}

pub fn markov_next_dist(prev: usize, prior: &MarkovPrior) -> Result<Vec<f64>> {
    let j = prior.n_arms;
    check_arm(prev, j)?;
    let rest = (1.0 - prior.p) / (j - 1) as f64;
    let mut row = vec![rest; j];
    row[prior.successor(prev)] = prior.p;
    Ok(row)
}

impl PriorProvider for MarkovPrior {
    fn num_arms(&self) -> usize {
        self.n_arms
    }

    fn initial_dist(&self) -> Vec<f64> {
        vec![1.0 / self.n_arms as f64; self.n_arms]
    }

    fn next_dist(&self, prev: usize) -> Result<Vec<f64>> {
        markov_next_dist(prev, self)
    }
}

/// Parameters of the conditional mean-reward prior: under "arm j is optimal"
/// arm j has mean `mu + gap` and every other arm has mean `mu`, each with
/// standard deviation `sigma0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixturePriorParams {
    pub mu: f64,
    pub gap: f64,
    pub sigma0: f64,
    /// Rate of the exponential gap prior. Carried for completeness; runs use a fixed gap.
    pub sigma1: f64,
    /// Draw true means around the conditional mean instead of using it exactly.
    pub perturb: bool,
}

impl Default for MixturePriorParams {
    fn default() -> Self {
        Self {
            mu: 0.0,
            gap: 2.0,
            sigma0: 0.2f64.sqrt(),
            sigma1: 1.0,
            perturb: false,
        }
    }
}

impl MixturePriorParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.gap > 0.0) {
            return Err(Error::invalid("gap", format!("{} must be positive", self.gap)));
        }
        if !(self.sigma0 > 0.0) {
            return Err(Error::invalid("sigma0", format!("{} must be positive", self.sigma0)));
        }
        if !(self.sigma1 > 0.0) {
            return Err(Error::invalid("sigma1", format!("{} must be positive", self.sigma1)));
        }
        if !self.mu.is_finite() {
            return Err(Error::invalid("mu", "must be finite"));
        }
        Ok(())
    }

    /// `(mu, ..., mu + gap, ..., mu)` with the bump at `optimal`.
    pub fn conditional_mean(&self, optimal: usize, n_arms: usize) -> Vec<f64> {
        let mut theta = vec![self.mu; n_arms];
        theta[optimal] += self.gap;
        theta
    }
}

/// Data-free mixture posterior with component j meaning "arm j is optimal".
pub fn build_mixture_prior(weights: &[f64], params: &MixturePriorParams, noise_var: f64) -> Result<MixturePosterior> {
    params.validate()?;
    validate_distribution(weights, 1e-9)?;
    let j = weights.len();
    let v0 = params.sigma0 * params.sigma0;
    let mut means = Vec::with_capacity(j * j);
    for comp in 0..j {
        means.extend(params.conditional_mean(comp, j));
    }
    MixturePosterior::from_components(weights, means, vec![v0; j * j], noise_var)
}

/// Which of the three structured transition matrices to build.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum UKind {
    /// Successor structure: row j has a 1 at its cyclic successor.
    Successor,
    /// Two groups: a cycle over the first J-2 arms and a swapped pair.
    TwoGroups,
    /// Successor with weight 1 plus the second successor with weight 0.5.
    Diffuse,
}

impl TryFrom<u8> for UKind {
    type Error = Error;

    fn try_from(k: u8) -> Result<Self> {
        match k {
            1 => Ok(UKind::Successor),
            2 => Ok(UKind::TwoGroups),
            3 => Ok(UKind::Diffuse),
            _ => Err(Error::invalid(
                "u_kind",
                format!("unknown kind {k}, expected 1, 2 or 3"),
            )),
        }
    }
}

impl From<UKind> for u8 {
    fn from(k: UKind) -> u8 {
        match k {
            UKind::Successor => 1,
            UKind::TwoGroups => 2,
            UKind::Diffuse => 3,
        }
    }
}

pub fn u_matrix(kind: UKind, n_arms: usize) -> Result<DMatrix<f64>> {
    let j = n_arms;
    let min = if kind == UKind::Successor { 2 } else { 3 };
    if j < min {
        return Err(Error::invalid(
            "num_arms",
            format!("kind {} needs at least {min} arms", u8::from(kind)),
        ));
    }
    let mut u = DMatrix::zeros(j, j);
    match kind {
        UKind::Successor => {
            for r in 0..j {
                u[(r, (r + 1) % j)] = 1.0;
            }
        }
        UKind::Diffuse => {
            for r in 0..j {
                u[(r, (r + 1) % j)] = 1.0;
                u[(r, (r + 2) % j)] = 0.5;
            }
        }
        UKind::TwoGroups => {
            for r in 0..j - 3 {
                u[(r, r + 1)] = 1.0;
            }
            u[(j - 3, 0)] = 1.0;
            u[(j - 2, j - 1)] = 1.0;
            u[(j - 1, j - 2)] = 1.0;
        }
    }
    Ok(u)
}

/// Gaussian prior whose mean is a scaled row of a transition matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianUPrior {
    pub u: DMatrix<f64>,
    pub mu0: f64,
    pub sigma0: f64,
}

impl GaussianUPrior {
    pub fn new(kind: UKind, n_arms: usize, mu0: f64, sigma0: f64) -> Result<Self> {
        if !(mu0 > 0.0) {
            return Err(Error::invalid("mu0", "must be positive"));
        }
        if !(sigma0 > 0.0) {
            return Err(Error::invalid("sigma0", "must be positive"));
        }
        Ok(Self {
            u: u_matrix(kind, n_arms)?,
            mu0,
            sigma0,
        })
    }

    pub fn num_arms(&self) -> usize {
        self.u.nrows()
    }

    /// Component means for the first task: each arm optimal with equal
    /// probability, mean `mu0 * e_j` under component j.
    pub fn first_task_means(&self) -> Vec<Vec<f64>> {
        let j = self.num_arms();
        (0..j)
            .map(|c| {
                let mut m = vec![0.0; j];
                m[c] = self.mu0;
                m
            })
            .collect()
    }

    /// Prior over the first task as a uniform mixture.
    pub fn first_task_posterior(&self, noise_var: f64) -> Result<MixturePosterior> {
        let j = self.num_arms();
        let means: Vec<f64> = self.first_task_means().into_iter().flatten().collect();
        let v0 = self.sigma0 * self.sigma0;
        MixturePosterior::from_components(&vec![1.0 / j as f64; j], means, vec![v0; j * j], noise_var)
    }

    /// Prior for a later task as a single Gaussian component.
    pub fn task_posterior(&self, prev: usize, noise_var: f64) -> Result<MixturePosterior> {
        let (mean, var) = gaussian_prior_from_u(prev, self)?;
        let j = mean.len();
        MixturePosterior::gaussian(mean, vec![var; j], noise_var)
    }
}

/// `(mu0 * U[prev, :], sigma0^2)`; the covariance is that scale times identity.
pub fn gaussian_prior_from_u(prev: usize, prior: &GaussianUPrior) -> Result<(Vec<f64>, f64)> {
    check_arm(prev, prior.num_arms())?;
    let mean = prior.u.row(prev).iter().map(|x| prior.mu0 * x).collect();
    Ok((mean, prior.sigma0 * prior.sigma0))
}

/// Largest vocabulary accepted by default.
pub const DEFAULT_VOCAB_CAP: usize = 100;

const RENORMALIZE_TOL: f64 = 1e-4;

/// Vocabulary plus order-1 next-word distributions.
#[derive(Clone, Debug, PartialEq)]
pub struct WordModelTable {
    vocab: Vec<String>,
    index: HashMap<String, usize>,
    initial: Vec<f64>,
    transitions: Vec<Vec<f64>>,
}

/// On-disk layout. Rows are sparse: words missing from a row have probability 0.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WordTableFile {
    pub vocab: Vec<String>,
    pub initial: Vec<f64>,
    pub transitions: BTreeMap<String, BTreeMap<String, f64>>,
    /// Multi-word contexts keyed by space-joined words. Validated, not used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contexts: Option<BTreeMap<String, BTreeMap<String, f64>>>,
}

impl WordModelTable {
    pub fn new(vocab: Vec<String>, initial: Vec<f64>, transitions: Vec<Vec<f64>>) -> Result<Self> {
        Self::with_cap(vocab, initial, transitions, DEFAULT_VOCAB_CAP)
    }

    pub fn with_cap(vocab: Vec<String>, initial: Vec<f64>, transitions: Vec<Vec<f64>>, cap: usize) -> Result<Self> {
        let j = vocab.len();
        if j < 2 {
            return Err(Error::WordTable("vocabulary needs at least two words".into()));
        }
        if j > cap {
            return Err(Error::WordTable(format!("vocabulary of {j} words exceeds cap {cap}")));
        }
        let mut index = HashMap::with_capacity(j);
        for (i, w) in vocab.iter().enumerate() {
            if index.insert(w.clone(), i).is_some() {
                return Err(Error::WordTable(format!("duplicate vocabulary word `{w}`")));
            }
        }
        if initial.len() != j || transitions.len() != j {
            return Err(Error::WordTable("row count does not match vocabulary".into()));
        }
        let initial = normalize_row(initial, "<initial>")?;
        let transitions = transitions
            .into_iter()
            .zip(&vocab)
            .map(|(row, w)| {
                if row.len() != j {
                    return Err(Error::WordTable(format!("row for `{w}` has {} entries", row.len())));
                }
                normalize_row(row, w)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            vocab,
            index,
            initial,
            transitions,
        })
    }

    pub fn from_file_repr(file: WordTableFile, cap: usize) -> Result<Self> {
        let j = file.vocab.len();
        let lookup: HashMap<&str, usize> = file.vocab.iter().enumerate().map(|(i, w)| (w.as_str(), i)).collect();
        let dense = |ctx: &str, row: &BTreeMap<String, f64>| -> Result<Vec<f64>> {
            let mut out = vec![0.0; j];
            for (w, &p) in row {
                let i = *lookup
                    .get(w.as_str())
                    .ok_or_else(|| Error::WordTable(format!("row for `{ctx}` names unknown word `{w}`")))?;
                out[i] = p;
            }
            Ok(out)
        };
        let mut transitions = Vec::with_capacity(j);
        for w in &file.vocab {
            let row = file
                .transitions
                .get(w)
                .ok_or_else(|| Error::WordTable(format!("missing transition row for `{w}`")))?;
            transitions.push(dense(w, row)?);
        }
        if let Some(extra) = file.transitions.keys().find(|k| !lookup.contains_key(k.as_str())) {
            return Err(Error::WordTable(format!("transition row for unknown word `{extra}`")));
        }
        if let Some(ctxs) = &file.contexts {
            for (ctx, row) in ctxs {
                for w in ctx.split_whitespace() {
                    if !lookup.contains_key(w) {
                        return Err(Error::WordTable(format!("context `{ctx}` names unknown word `{w}`")));
                    }
                }
                normalize_row(dense(ctx, row)?, ctx)?;
            }
        }
        Self::with_cap(file.vocab, file.initial, transitions, cap)
    }

    pub fn to_file_repr(&self) -> WordTableFile {
        let transitions = self
            .vocab
            .iter()
            .zip(&self.transitions)
            .map(|(w, row)| {
                let sparse = row
                    .iter()
                    .enumerate()
                    .filter(|(_, p)| **p > 0.0)
                    .map(|(i, p)| (self.vocab[i].clone(), *p))
                    .collect();
                (w.clone(), sparse)
            })
            .collect();
        WordTableFile {
            vocab: self.vocab.clone(),
            initial: self.initial.clone(),
            transitions,
            contexts: None,
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(&self.to_file_repr()).map_err(|e| Error::WordTable(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn vocab(&self) -> &[String] {
        &self.vocab
    }

    pub fn word(&self, i: usize) -> &str {
        &self.vocab[i]
    }

    pub fn word_index(&self, w: &str) -> Option<usize> {
        self.index.get(w).copied()
    }

    pub fn initial(&self) -> &[f64] {
        &self.initial
    }

    pub fn row(&self, prev: usize) -> Result<&[f64]> {
        check_arm(prev, self.vocab.len())?;
        Ok(&self.transitions[prev])
    }

    /// Entropy of every transition row, in nats.
    pub fn row_entropies(&self) -> Vec<f64> {
        self.transitions
            .iter()
            .map(|r| conditional_entropy(r).expect("rows validated at construction"))
            .collect()
    }
}

fn normalize_row(mut row: Vec<f64>, ctx: &str) -> Result<Vec<f64>> {
    if let Some(p) = row
        .iter()
        .find(|p| !p.is_finite() || **p < 0.0 || **p > 1.0 + RENORMALIZE_TOL)
    {
        return Err(Error::WordTable(format!(
            "row for `{ctx}` has non-probability entry {p}"
        )));
    }
    let s: f64 = row.iter().sum();
    if (s - 1.0).abs() > RENORMALIZE_TOL {
        return Err(Error::WordTable(format!("row for `{ctx}` sums to {s}")));
    }
    row.iter_mut().for_each(|p| *p /= s);
    Ok(row)
}

impl PriorProvider for WordModelTable {
    fn num_arms(&self) -> usize {
        self.vocab.len()
    }

    fn initial_dist(&self) -> Vec<f64> {
        self.initial.clone()
    }

    fn next_dist(&self, prev: usize) -> Result<Vec<f64>> {
        Ok(self.row(prev)?.to_vec())
    }
}

pub fn load_word_table(path: impl AsRef<Path>) -> Result<WordModelTable> {
    load_word_table_with_cap(path, DEFAULT_VOCAB_CAP)
}

pub fn load_word_table_with_cap(path: impl AsRef<Path>, cap: usize) -> Result<WordModelTable> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: WordTableFile =
        serde_json::from_str(&text).map_err(|e| Error::WordTable(format!("{}: {e}", path.display())))?;
    WordModelTable::from_file_repr(file, cap)
}

//! Synthetic populations and linkage structures for the simulation study.
//!
//! The generator sets `A = U`: record `i` carries the true `x_i` of unit `i`
//! and is its only possible match.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Normal, Open01};

use crate::error::{Error, Result};
use crate::linkage::{
    build_linkage, AuxDatabase, BestLinks, LinkageStructure, MatchSet, Scope, WeightKind,
    WeightScheme,
};

/// Coefficients of `y = β₀ + β₁ x + ε`.
pub const BETA: [f64; 2] = [1.0, 5.0];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationModel {
    pub size: usize,
    /// Residual scale; the residual sd of unit `i` is `sigma * x_i^gamma`.
    pub sigma: f64,
    pub gamma: f64,
}

impl PopulationModel {
    pub fn new(size: usize, sigma: f64, gamma: f64) -> Result<Self> {
        let model = Self { size, sigma, gamma };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if self.size < 2 {
            return Err(Error::InvalidParameter(format!(
                "population size {} is below 2",
                self.size
            )));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "sigma = {} must be positive",
                self.sigma
            )));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidParameter(format!(
                "gamma = {} is outside [0, 1]",
                self.gamma
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticPopulation {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl SyntheticPopulation {
    pub fn size(&self) -> usize {
        self.y.len()
    }

    pub fn total(&self) -> f64 {
        self.y.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.total() / self.y.len() as f64
    }

    /// The auxiliary database `A = U`.
    pub fn aux(&self) -> AuxDatabase {
        AuxDatabase::from_scalars(&self.x).expect("generated x are finite")
    }
}

pub fn gen_population<R: Rng + ?Sized>(
    model: &PopulationModel,
    rng: &mut R,
) -> Result<SyntheticPopulation> {
    model.validate()?;
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut x = Vec::with_capacity(model.size);
    let mut y = Vec::with_capacity(model.size);
    for _ in 0..model.size {
        let xi: f64 = Open01.sample(rng);
        let sd = model.sigma * xi.powf(model.gamma);
        let eps: f64 = std_normal.sample(rng);
        x.push(xi);
        y.push(BETA[0] + BETA[1] * xi + sd * eps);
    }
    Ok(SyntheticPopulation { x, y })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkageModel {
    /// Proportions of units with 1, 2 and 3 links.
    pub p: [f64; 3],
    /// Proportion of units whose match is among their links.
    pub p_match: f64,
    /// Proportion of units whose best link is the match.
    pub p_best_match: f64,
    /// False links to record `ℓ` are accepted with probability `x_ℓ^tilt`;
    /// zero gives uniform false links.
    pub false_link_tilt: f64,
}

impl LinkageModel {
    pub fn new(p: [f64; 3], p_match: f64, p_best_match: f64) -> Result<Self> {
        let model = Self {
            p,
            p_match,
            p_best_match,
            false_link_tilt: 0.0,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn with_tilt(mut self, tilt: f64) -> Result<Self> {
        self.false_link_tilt = tilt;
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(Error::InvalidParameter(format!(
                "link-count proportions {:?} must lie in [0, 1]",
                self.p
            )));
        }
        let sum: f64 = self.p.iter().sum();
        if (sum - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidParameter(format!(
                "link-count proportions sum to {sum}, expected 1"
            )));
        }
        let p1 = self.p[0];
        let perfect = p1 == 1.0 && self.p_match == 1.0;
        if !perfect && !(self.p_match > p1 && self.p_match <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "p_M = {} must lie in (p1, 1] with p1 = {p1}",
                self.p_match
            )));
        }
        if !(self.p_best_match >= p1 && self.p_best_match <= self.p_match) {
            return Err(Error::InvalidParameter(format!(
                "p_ML = {} must lie in [p1, p_M] = [{p1}, {}]",
                self.p_best_match, self.p_match
            )));
        }
        if !(self.false_link_tilt >= 0.0 && self.false_link_tilt.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "false-link tilt {} must be non-negative",
                self.false_link_tilt
            )));
        }
        Ok(())
    }

    /// Unit counts with 1, 2 and 3 links, summing to `n`.
    pub fn link_counts(&self, n: usize) -> [usize; 3] {
        let mut counts = self.p.map(|p| (n as f64 * p).round_ties_even() as usize);
        let sum: usize = counts.iter().sum();
        let largest = (0..3).max_by_key(|&d| (counts[d], 3 - d)).unwrap_or(0);
        counts[largest] = (counts[largest] + n).saturating_sub(sum);
        counts
    }

    /// Number of matched units, `round(N p_M)`.
    pub fn matched_count(&self, n: usize) -> usize {
        (n as f64 * self.p_match).round_ties_even() as usize
    }

    /// Number of units whose best link is the match, `round(N p_ML)`.
    pub fn best_match_count(&self, n: usize) -> usize {
        (n as f64 * self.p_best_match).round_ties_even() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticLinkage {
    pub matches: MatchSet,
    pub linkage: LinkageStructure,
    pub best: BestLinks,
}

/// Generates `(M, L, best links)` over `U = A = 0..aux.len()`.
pub fn gen_linkage<R: Rng + ?Sized>(
    aux: &AuxDatabase,
    model: &LinkageModel,
    rng: &mut R,
) -> Result<SyntheticLinkage> {
    model.validate()?;
    let n = aux.len();
    let counts = model.link_counts(n);
    let max_d = counts.iter().rposition(|&c| c > 0).map_or(1, |d| d + 1);
    if n < max_d + 1 && max_d > 1 {
        return Err(Error::InvalidParameter(format!(
            "{n} records cannot supply {} distinct false links",
            max_d - 1
        )));
    }
    let multi = n - counts[0];
    let matched_multi = model
        .matched_count(n)
        .checked_sub(counts[0])
        .filter(|&m| m <= multi)
        .ok_or_else(|| {
            Error::InvalidParameter(format!(
                "round(N p_M) = {} is not between {} and {n}",
                model.matched_count(n),
                counts[0]
            ))
        })?;
    let best_multi = model
        .best_match_count(n)
        .checked_sub(counts[0])
        .filter(|&m| m <= matched_multi)
        .ok_or_else(|| {
            Error::InvalidParameter(format!(
                "round(N p_ML) = {} is not between round(N p1) and round(N p_M)",
                model.best_match_count(n)
            ))
        })?;

    // (a) link counts
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut d = vec![0usize; n];
    let mut start = 0;
    for (k, &c) in counts.iter().enumerate() {
        for &i in &order[start..start + c] {
            d[i] = k + 1;
        }
        start += c;
    }

    // (b, c) matched units: all unique links, plus a uniform draw among the rest
    let mut multi_units: Vec<usize> = (0..n).filter(|&i| d[i] > 1).collect();
    multi_units.shuffle(rng);
    let mut matched = vec![false; n];
    for i in 0..n {
        matched[i] = d[i] == 1;
    }
    let matched_multi_units: Vec<usize> = multi_units[..matched_multi].to_vec();
    for &i in &matched_multi_units {
        matched[i] = true;
    }

    // (d) false links
    let accept = |r: usize, rng: &mut R| -> bool {
        model.false_link_tilt == 0.0
            || rng.random::<f64>() < aux.row(r)[0].clamp(0.0, 1.0).powf(model.false_link_tilt)
    };
    let mut links = Vec::with_capacity(counts[0] + 2 * counts[1] + 3 * counts[2]);
    let mut alpha: Vec<Vec<usize>> = Vec::with_capacity(n);
    for i in 0..n {
        let n_false = d[i] - usize::from(matched[i]);
        let mut row: Vec<usize> = Vec::with_capacity(d[i]);
        while row.len() < n_false {
            let r = rng.random_range(0..n);
            if r == i || row.contains(&r) || !accept(r, rng) {
                continue;
            }
            row.push(r);
        }
        if matched[i] {
            let slot = rng.random_range(0..=row.len());
            row.insert(slot, i);
        }
        links.extend(row.iter().map(|&l| (i, l)));
        alpha.push(row);
    }

    // (e) best links
    let mut best_is_match = vec![false; n];
    for i in 0..n {
        best_is_match[i] = d[i] == 1;
    }
    let mut candidates = matched_multi_units;
    candidates.shuffle(rng);
    for &i in &candidates[..best_multi] {
        best_is_match[i] = true;
    }
    let mut best = Vec::with_capacity(n);
    for i in 0..n {
        if best_is_match[i] {
            best.push(i);
        } else {
            let false_links: Vec<usize> = alpha[i].iter().copied().filter(|&l| l != i).collect();
            best.push(false_links[rng.random_range(0..false_links.len())]);
        }
    }

    let units: Vec<usize> = (0..n).collect();
    let linkage = build_linkage(&links, &units, n, aux)?;
    let pairs: Vec<(usize, usize)> = (0..n).filter(|&i| matched[i]).map(|i| (i, i)).collect();
    let matches = MatchSet::new(n, n, &pairs)?;
    let best = BestLinks::from_positions(&linkage, best)?;
    Ok(SyntheticLinkage {
        matches,
        linkage,
        best,
    })
}

/// Incidence weights favouring the match of each record with `q`.
///
/// For `m_ℓ > 1` the favoured unit gets `q` and the others `(1-q)/(m_ℓ-1)`;
/// when the match of `ℓ` is not linked to it, the favoured unit is drawn
/// uniformly from `β_ℓ`.
pub fn gen_pi_q_weights<R: Rng + ?Sized>(
    linkage: &LinkageStructure,
    matches: &MatchSet,
    q: f64,
    rng: &mut R,
) -> Result<WeightScheme> {
    if linkage.scope() != Scope::Population {
        return Err(Error::RequiresPopulationScope);
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "incidence weight q = {q} is outside (0, 1]"
        )));
    }
    let favoured: Vec<Option<usize>> = (0..linkage.n_records())
        .map(|l| {
            let beta = linkage.beta(l);
            match beta.len() {
                0 | 1 => None,
                m => Some(
                    matches
                        .unit_of(l)
                        .filter(|u| beta.contains(u))
                        .unwrap_or_else(|| beta[rng.random_range(0..m)]),
                ),
            }
        })
        .collect();
    let weights = linkage
        .units()
        .iter()
        .enumerate()
        .map(|(p, &i)| {
            linkage
                .alpha_at(p)
                .iter()
                .map(|&l| match favoured[l] {
                    None => 1.0,
                    Some(f) if f == i => q,
                    Some(_) => (1.0 - q) / (linkage.m(l) - 1) as f64,
                })
                .collect()
        })
        .collect();
    WeightScheme::new(WeightKind::Incidence, linkage, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream_rng;
    use approx::assert_relative_eq;

    fn population(n: usize, seed: u64) -> SyntheticPopulation {
        let model = PopulationModel::new(n, 1.5, 0.0).unwrap();
        gen_population(&model, &mut stream_rng(seed, 0)).unwrap()
    }

    #[test]
    fn noiseless_population_is_linear() {
        let model = PopulationModel::new(2000, 1e-12, 0.0).unwrap();
        let pop = gen_population(&model, &mut stream_rng(1, 0)).unwrap();
        let n = pop.size() as f64;
        let (mx, my) = (pop.x.iter().sum::<f64>() / n, pop.mean());
        let sxy: f64 = pop.x.iter().zip(&pop.y).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = pop.x.iter().map(|x| (x - mx).powi(2)).sum();
        let syy: f64 = pop.y.iter().map(|y| (y - my).powi(2)).sum();
        assert!(sxy / (sxx * syy).sqrt() > 0.999999);
        assert!(pop.x.iter().all(|&x| x > 0.0 && x < 1.0));
    }

    #[test]
    fn population_sd_matches_model() {
        let pop = population(50_000, 2);
        let n = pop.size() as f64;
        let var = pop.y.iter().map(|y| (y - pop.mean()).powi(2)).sum::<f64>() / (n - 1.0);
        // 25/12 from the slope on a uniform x plus 1.5² noise.
        assert_relative_eq!(var.sqrt(), (25.0 / 12.0 + 2.25f64).sqrt(), max_relative = 0.02);
    }

    #[test]
    fn heteroscedastic_residuals_scale_with_x() {
        let model = PopulationModel::new(200_000, 2.0, 1.0).unwrap();
        let pop = gen_population(&model, &mut stream_rng(3, 0)).unwrap();
        let mut bins = [(0.0, 0usize); 5];
        for (x, y) in pop.x.iter().zip(&pop.y) {
            let e = y - BETA[0] - BETA[1] * x;
            let b = ((x * 5.0) as usize).min(4);
            bins[b].0 += e * e;
            bins[b].1 += 1;
        }
        for (b, (ss, c)) in bins.iter().enumerate() {
            // E[ε²] over a bin of width 0.2 is 4 * E[x²] for x uniform on the bin.
            let (lo, hi) = (b as f64 * 0.2, (b + 1) as f64 * 0.2);
            let ex2 = (hi.powi(3) - lo.powi(3)) / (3.0 * (hi - lo));
            assert_relative_eq!(ss / *c as f64, 4.0 * ex2, max_relative = 0.05);
        }
    }

    #[test]
    fn rejects_bad_models() {
        assert!(PopulationModel::new(10, 0.0, 0.0).is_err());
        assert!(PopulationModel::new(10, 1.0, 1.5).is_err());
        assert!(LinkageModel::new([0.2, 0.4, 0.4], 0.2, 0.2).is_err());
        assert!(LinkageModel::new([0.2, 0.4, 0.4], 0.4, 0.5).is_err());
        assert!(LinkageModel::new([0.2, 0.4, 0.4], 0.4, 0.1).is_err());
        assert!(LinkageModel::new([0.2, 0.4, 0.5], 0.4, 0.4).is_err());
        assert!(LinkageModel::new([1.0, 0.0, 0.0], 1.0, 1.0).is_ok());
    }

    #[test]
    fn rounded_counts_sum_to_n() {
        let m = LinkageModel::new([0.4, 0.3, 0.3], 0.9, 0.9).unwrap();
        assert_eq!(m.link_counts(5000), [2000, 1500, 1500]);
        assert_eq!(m.link_counts(7).iter().sum::<usize>(), 7);
        let m = LinkageModel::new([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0], 0.5, 0.4).unwrap();
        assert_eq!(m.link_counts(10).iter().sum::<usize>(), 10);
        assert_eq!(m.link_counts(11).iter().sum::<usize>(), 11);
    }

    #[test]
    fn perfect_linkage_is_identity() {
        let pop = population(200, 4);
        let aux = pop.aux();
        let model = LinkageModel::new([1.0, 0.0, 0.0], 1.0, 1.0).unwrap();
        let g = gen_linkage(&aux, &model, &mut stream_rng(4, 1)).unwrap();
        assert_eq!(g.linkage.n_links(), 200);
        for i in 0..200 {
            assert_eq!(g.linkage.alpha(i).unwrap(), &[i]);
            assert_eq!(g.matches.record_of(i), Some(i));
            assert_eq!(g.best.at(i), i);
        }
    }

    #[test]
    fn link_count_arithmetic() {
        let pop = population(5000, 5);
        let model = LinkageModel::new([0.4, 0.3, 0.3], 0.9, 0.65).unwrap();
        let g = gen_linkage(&pop.aux(), &model, &mut stream_rng(5, 1)).unwrap();
        let l = &g.linkage;
        let mut by_d = [0usize; 3];
        for i in 0..5000 {
            by_d[l.d(i).unwrap() - 1] += 1;
        }
        assert_eq!(by_d, [2000, 1500, 1500]);
        assert_eq!(l.n_links(), 9500);
    }

    #[test]
    fn structural_audit() {
        let pop = population(5000, 6);
        let model = LinkageModel::new([0.2, 0.4, 0.4], 0.4, 0.3).unwrap();
        let g = gen_linkage(&pop.aux(), &model, &mut stream_rng(6, 1)).unwrap();
        let l = &g.linkage;
        assert_eq!(g.matches.len(), 2000);
        let mut matched_multi = 0;
        let mut correct_best = 0;
        for i in 0..5000 {
            let alpha = l.alpha(i).unwrap();
            let has_match = alpha.contains(&i);
            assert_eq!(has_match, g.matches.record_of(i).is_some());
            if alpha.len() == 1 {
                assert!(has_match);
            } else if has_match {
                matched_multi += 1;
            }
            assert!(alpha.contains(&g.best.at(i)));
            correct_best += usize::from(g.best.at(i) == i);
        }
        assert_eq!(matched_multi, 1000);
        assert_eq!(correct_best, 1500);
        // 2000 matches over 1000 + 2 * 2000 + 3 * 2000 links.
        assert_relative_eq!(2000.0 / l.n_links() as f64, 2000.0 / 11000.0);
    }

    #[test]
    fn pi_q_weights_favour_the_match() {
        let pop = population(3000, 7);
        let model = LinkageModel::new([0.2, 0.4, 0.4], 0.8, 0.8).unwrap();
        let g = gen_linkage(&pop.aux(), &model, &mut stream_rng(7, 1)).unwrap();
        let w = gen_pi_q_weights(&g.linkage, &g.matches, 0.4, &mut stream_rng(7, 2)).unwrap();
        let l = &g.linkage;
        let mut hist = [0usize; 8];
        for rec in 0..l.n_records() {
            let m = l.m(rec);
            hist[m.min(7)] += 1;
            let weights: Vec<f64> = l.beta(rec).iter().map(|&i| w.weight(l, i, rec).unwrap()).collect();
            if m == 1 {
                assert_eq!(weights, vec![1.0]);
            }
            if m == 3 && l.beta(rec).contains(&rec) {
                for (&i, &v) in l.beta(rec).iter().zip(&weights) {
                    assert_relative_eq!(v, if i == rec { 0.4 } else { 0.3 }, max_relative = 1e-15);
                }
            }
            if m > 0 {
                assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
        // m_ℓ is a match indicator plus roughly Poisson(1.4) false links here:
        // wider than d ∈ {1, 2, 3}, with about 85% of records in 0..=3.
        assert!(hist[4..].iter().sum::<usize>() > 0);
        assert!(hist[..4].iter().sum::<usize>() as f64 > 0.8 * l.n_records() as f64);
    }

    #[test]
    fn deterministic_for_a_seed() {
        let pop = population(1000, 8);
        let model = LinkageModel::new([0.2, 0.4, 0.4], 0.8, 0.5).unwrap();
        let a = gen_linkage(&pop.aux(), &model, &mut stream_rng(8, 1)).unwrap();
        let b = gen_linkage(&pop.aux(), &model, &mut stream_rng(8, 1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(pop, population(1000, 8));
    }

    #[test]
    fn tilt_biases_false_links_upwards() {
        let pop = population(5000, 9);
        let model = LinkageModel::new([0.2, 0.4, 0.4], 0.4, 0.4)
            .unwrap()
            .with_tilt(3.0)
            .unwrap();
        let g = gen_linkage(&pop.aux(), &model, &mut stream_rng(9, 1)).unwrap();
        let (mut sum, mut count) = (0.0, 0);
        for (i, l) in g.linkage.links() {
            if i != l {
                sum += pop.x[l];
                count += 1;
            }
        }
        // Density proportional to x³ on (0, 1) has mean 0.8.
        assert_relative_eq!(sum / count as f64, 0.8, max_relative = 0.03);
    }
}

//! Populations, auxiliary databases, matches, links, and link weights.
//!
//! Units of the population are the dense indices `0..N` and records of the
//! auxiliary database are the dense indices `0..N_A`. A [`LinkageStructure`]
//! holds the links either for the whole population (`L`) or for a sample only
//! (`L_s`); in the latter case the per-record link sets are the sample-observed
//! `s_ℓ` rather than the full `β_ℓ`.

use std::collections::HashSet;

use crate::error::{Error, Result};

/// Absolute tolerance for the weight-sum constraints.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// Auxiliary database `A` with one `x` vector per record.
#[derive(Debug, Clone, PartialEq)]
pub struct AuxDatabase {
    dim: usize,
    x: Vec<f64>,
    total: Vec<f64>,
    mean: Vec<f64>,
}

impl AuxDatabase {
    /// Builds the database from row-major values, `dim` values per record.
    pub fn from_flat(dim: usize, x: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidParameter(
                "auxiliary dimension must be at least 1".into(),
            ));
        }
        if !x.len().is_multiple_of(dim) || x.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "{} auxiliary values do not form records of dimension {dim}",
                x.len()
            )));
        }
        if let Some(v) = x.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "non-finite auxiliary value {v}"
            )));
        }
        let n = x.len() / dim;
        let mut total = vec![0.0; dim];
        for row in x.chunks_exact(dim) {
            for (t, v) in total.iter_mut().zip(row) {
                *t += v;
            }
        }
        let mean = total.iter().map(|t| t / n as f64).collect();
        Ok(Self { dim, x, total, mean })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "record {bad} has {} values, expected {dim}",
                rows[bad].len()
            )));
        }
        Self::from_flat(dim, rows.concat())
    }

    /// Scalar covariate per record.
    pub fn from_scalars(x: &[f64]) -> Result<Self> {
        Self::from_flat(1, x.to_vec())
    }

    pub fn len(&self) -> usize {
        self.x.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, record: usize) -> &[f64] {
        &self.x[record * self.dim..(record + 1) * self.dim]
    }

    /// `X_A`.
    pub fn total(&self) -> &[f64] {
        &self.total
    }

    /// `X̄_A = X_A / N_A`.
    pub fn mean(&self) -> &[f64] {
        &self.mean
    }
}

/// Target variable over the population `U = 0..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    y: Vec<f64>,
}

impl Population {
    pub fn new(y: Vec<f64>) -> Self {
        Self { y }
    }

    pub fn size(&self) -> usize {
        self.y.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn total(&self) -> f64 {
        self.y.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.total() / self.y.len() as f64
    }

    pub fn values_for(&self, units: &[usize]) -> Vec<f64> {
        units.iter().map(|&i| self.y[i]).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    /// `L` over `U × A`.
    Population,
    /// `L_s` over `s × A`.
    Sample,
}

/// Bipartite links between covered units and auxiliary records.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkageStructure {
    scope: Scope,
    population_size: usize,
    units: Vec<usize>,
    position: Vec<Option<usize>>,
    alpha: Vec<Vec<usize>>,
    beta: Vec<Vec<usize>>,
    n_links: usize,
}

impl LinkageStructure {
    pub fn scope(&self) -> Scope {
        self.scope
    }

    pub fn population_size(&self) -> usize {
        self.population_size
    }

    pub fn n_records(&self) -> usize {
        self.beta.len()
    }

    /// Covered units in ascending order.
    pub fn units(&self) -> &[usize] {
        &self.units
    }

    /// Index of `unit` within [`units`](Self::units).
    pub fn position(&self, unit: usize) -> Option<usize> {
        self.position.get(unit).copied().flatten()
    }

    /// `α_i` for the covered unit at position `pos`.
    pub fn alpha_at(&self, pos: usize) -> &[usize] {
        &self.alpha[pos]
    }

    pub fn alpha(&self, unit: usize) -> Option<&[usize]> {
        self.position(unit).map(|p| self.alpha[p].as_slice())
    }

    /// `β_ℓ` under population scope, `s_ℓ` under sample scope.
    pub fn beta(&self, record: usize) -> &[usize] {
        &self.beta[record]
    }

    pub fn d(&self, unit: usize) -> Option<usize> {
        self.alpha(unit).map(<[usize]>::len)
    }

    pub fn m(&self, record: usize) -> usize {
        self.beta[record].len()
    }

    /// `|L|` (or `|L_s|`).
    pub fn n_links(&self) -> usize {
        self.n_links
    }

    /// `α(s)`: records with at least one link, ascending.
    pub fn linked_records(&self) -> Vec<usize> {
        (0..self.beta.len())
            .filter(|&l| !self.beta[l].is_empty())
            .collect()
    }

    /// All links as `(unit, record)` in unit order, then link order.
    pub fn links(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.units
            .iter()
            .zip(&self.alpha)
            .flat_map(|(&i, a)| a.iter().map(move |&l| (i, l)))
    }

    /// The sample links `L_s` implied by this structure for the given units.
    pub fn restrict(&self, sample: &[usize], aux: &AuxDatabase) -> Result<LinkageStructure> {
        let mut links = Vec::new();
        for &i in sample {
            let a = self.alpha(i).ok_or(Error::UnknownUnit { unit: i })?;
            links.extend(a.iter().map(|&l| (i, l)));
        }
        build_linkage(&links, sample, self.population_size, aux)
    }

    fn shape(&self) -> (Scope, usize, usize) {
        (self.scope, self.units.len(), self.n_links)
    }
}

/// Builds a linkage structure from `(unit, record)` pairs.
///
/// The scope is population when every unit of `0..population_size` is covered
/// and sample otherwise. Links of a unit keep their input order in `α_i`.
pub fn build_linkage(
    links: &[(usize, usize)],
    covered: &[usize],
    population_size: usize,
    aux: &AuxDatabase,
) -> Result<LinkageStructure> {
    let mut units = covered.to_vec();
    units.sort_unstable();
    if let Some(w) = units.windows(2).find(|w| w[0] == w[1]) {
        return Err(Error::InvalidParameter(format!(
            "unit {} listed twice among covered units",
            w[0]
        )));
    }
    if let Some(&u) = units.iter().find(|&&u| u >= population_size) {
        return Err(Error::UnknownUnit { unit: u });
    }
    let mut position = vec![None; population_size];
    for (p, &u) in units.iter().enumerate() {
        position[u] = Some(p);
    }

    let n_records = aux.len();
    let mut alpha = vec![Vec::new(); units.len()];
    let mut beta = vec![Vec::new(); n_records];
    let mut seen = HashSet::with_capacity(links.len());
    for &(i, l) in links {
        let pos = position
            .get(i)
            .copied()
            .flatten()
            .ok_or(Error::UnknownUnit { unit: i })?;
        if l >= n_records {
            return Err(Error::DanglingRecord { unit: i, record: l });
        }
        if !seen.insert((i, l)) {
            return Err(Error::DuplicateLink { unit: i, record: l });
        }
        alpha[pos].push(l);
    }
    if let Some(p) = alpha.iter().position(Vec::is_empty) {
        return Err(Error::UncoveredUnit { unit: units[p] });
    }
    for (&i, a) in units.iter().zip(&alpha) {
        for &l in a {
            beta[l].push(i);
        }
    }

    let scope = if units.len() == population_size {
        Scope::Population
    } else {
        Scope::Sample
    };
    Ok(LinkageStructure {
        scope,
        population_size,
        units,
        position,
        alpha,
        beta,
        n_links: links.len(),
    })
}

/// True matches `M`: at most one record per unit and one unit per record.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MatchSet {
    by_unit: Vec<Option<usize>>,
    by_record: Vec<Option<usize>>,
}

impl MatchSet {
    pub fn new(n_units: usize, n_records: usize, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut by_unit = vec![None; n_units];
        let mut by_record = vec![None; n_records];
        for &(i, l) in pairs {
            if i >= n_units {
                return Err(Error::UnknownUnit { unit: i });
            }
            if l >= n_records {
                return Err(Error::DanglingRecord { unit: i, record: l });
            }
            if by_unit[i].is_some() || by_record[l].is_some() {
                return Err(Error::InvalidParameter(format!(
                    "match ({i}, {l}) breaks one-to-one matching"
                )));
            }
            by_unit[i] = Some(l);
            by_record[l] = Some(i);
        }
        Ok(Self { by_unit, by_record })
    }

    /// `ι_i`.
    pub fn record_of(&self, unit: usize) -> Option<usize> {
        self.by_unit[unit]
    }

    pub fn unit_of(&self, record: usize) -> Option<usize> {
        self.by_record[record]
    }

    pub fn len(&self) -> usize {
        self.by_unit.iter().flatten().count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.by_unit
            .iter()
            .enumerate()
            .filter_map(|(i, l)| l.map(|l| (i, l)))
    }
}

/// Best link `ℓ_i` of every covered unit, stored by covered-unit position.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BestLinks {
    records: Vec<usize>,
}

impl BestLinks {
    /// `records[p]` is the best link of the unit at position `p` of `linkage`.
    pub fn from_positions(linkage: &LinkageStructure, records: Vec<usize>) -> Result<Self> {
        if records.len() != linkage.units().len() {
            return Err(Error::DimensionMismatch(format!(
                "{} best links for {} covered units",
                records.len(),
                linkage.units().len()
            )));
        }
        for (p, &l) in records.iter().enumerate() {
            if !linkage.alpha_at(p).contains(&l) {
                return Err(Error::BestLinkNotLinked {
                    unit: linkage.units()[p],
                    record: l,
                });
            }
        }
        Ok(Self { records })
    }

    pub fn from_pairs(linkage: &LinkageStructure, pairs: &[(usize, usize)]) -> Result<Self> {
        let mut records = vec![None; linkage.units().len()];
        for &(i, l) in pairs {
            let p = linkage.position(i).ok_or(Error::UnknownUnit { unit: i })?;
            if records[p].replace(l).is_some() {
                return Err(Error::InvalidParameter(format!(
                    "unit {i} has more than one best link"
                )));
            }
        }
        let records = records
            .into_iter()
            .enumerate()
            .map(|(p, r)| {
                r.ok_or_else(|| {
                    Error::MissingValue(format!("best link of unit {}", linkage.units()[p]))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_positions(linkage, records)
    }

    pub fn at(&self, pos: usize) -> usize {
        self.records[pos]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.records
    }

    /// Best links of the units covered by `to`, a restriction of `from`.
    pub fn restrict(&self, from: &LinkageStructure, to: &LinkageStructure) -> Result<Self> {
        let records = to
            .units()
            .iter()
            .map(|&i| {
                from.position(i)
                    .map(|p| self.records[p])
                    .ok_or(Error::UnknownUnit { unit: i })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::from_positions(to, records)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WeightKind {
    /// Sums to one over `β_ℓ` for every record with `m_ℓ > 0`.
    Incidence,
    /// Sums to one over `α_i` for every covered unit.
    Reverse,
}

impl WeightKind {
    fn label(self) -> &'static str {
        match self {
            WeightKind::Incidence => "incidence",
            WeightKind::Reverse => "reverse incidence",
        }
    }
}

/// Validated link weights `ω_iℓ`, laid out parallel to the `α_i` lists.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightScheme {
    kind: WeightKind,
    weights: Vec<Vec<f64>>,
    shape: (Scope, usize, usize),
}

impl WeightScheme {
    /// `weights[p][k]` is the weight of the `k`-th link of the unit at position `p`.
    pub fn new(kind: WeightKind, linkage: &LinkageStructure, weights: Vec<Vec<f64>>) -> Result<Self> {
        if kind == WeightKind::Incidence && linkage.scope() != Scope::Population {
            return Err(Error::RequiresPopulationScope);
        }
        if weights.len() != linkage.units().len() {
            return Err(Error::SchemeMismatch(format!(
                "{} weight rows for {} covered units",
                weights.len(),
                linkage.units().len()
            )));
        }
        for (p, row) in weights.iter().enumerate() {
            let unit = linkage.units()[p];
            let alpha = linkage.alpha_at(p);
            if row.len() != alpha.len() {
                return Err(Error::SchemeMismatch(format!(
                    "unit {unit} has {} links but {} weights",
                    alpha.len(),
                    row.len()
                )));
            }
            for (&w, &l) in row.iter().zip(alpha) {
                if !(0.0..=1.0).contains(&w) {
                    return Err(Error::WeightOutOfRange {
                        unit,
                        record: l,
                        value: w,
                    });
                }
            }
        }

        match kind {
            WeightKind::Reverse => {
                for (p, row) in weights.iter().enumerate() {
                    let sum: f64 = row.iter().sum();
                    if (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
                        return Err(Error::WeightSum {
                            kind: kind.label(),
                            owner: format!("unit {}", linkage.units()[p]),
                            sum,
                        });
                    }
                }
            }
            WeightKind::Incidence => {
                let mut sums = vec![0.0; linkage.n_records()];
                for (p, row) in weights.iter().enumerate() {
                    for (&w, &l) in row.iter().zip(linkage.alpha_at(p)) {
                        sums[l] += w;
                    }
                }
                for (l, &sum) in sums.iter().enumerate() {
                    if linkage.m(l) > 0 && (sum - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
                        return Err(Error::WeightSum {
                            kind: kind.label(),
                            owner: format!("record {l}"),
                            sum,
                        });
                    }
                }
            }
        }

        Ok(Self {
            kind,
            weights,
            shape: linkage.shape(),
        })
    }

    /// Builds a scheme from `(unit, record, weight)` triples covering every link.
    pub fn from_triples(
        kind: WeightKind,
        linkage: &LinkageStructure,
        triples: &[(usize, usize, f64)],
    ) -> Result<Self> {
        let mut rows: Vec<Vec<Option<f64>>> = (0..linkage.units().len())
            .map(|p| vec![None; linkage.alpha_at(p).len()])
            .collect();
        for &(i, l, w) in triples {
            let p = linkage.position(i).ok_or(Error::UnknownUnit { unit: i })?;
            let k = linkage
                .alpha_at(p)
                .iter()
                .position(|&r| r == l)
                .ok_or_else(|| {
                    Error::SchemeMismatch(format!("weight given for non-link ({i}, {l})"))
                })?;
            if rows[p][k].replace(w).is_some() {
                return Err(Error::DuplicateLink { unit: i, record: l });
            }
        }
        let weights = rows
            .into_iter()
            .enumerate()
            .map(|(p, row)| {
                row.into_iter()
                    .enumerate()
                    .map(|(k, w)| {
                        w.ok_or_else(|| {
                            Error::MissingValue(format!(
                                "weight of link ({}, {})",
                                linkage.units()[p],
                                linkage.alpha_at(p)[k]
                            ))
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(kind, linkage, weights)
    }

    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    pub fn row(&self, pos: usize) -> &[f64] {
        &self.weights[pos]
    }

    pub fn weight(&self, linkage: &LinkageStructure, unit: usize, record: usize) -> Option<f64> {
        let p = linkage.position(unit)?;
        let k = linkage.alpha_at(p).iter().position(|&l| l == record)?;
        Some(self.weights[p][k])
    }

    pub fn matches(&self, linkage: &LinkageStructure) -> bool {
        self.shape == linkage.shape()
    }

    /// Reverse weights of the units covered by `to`, a restriction of `from`.
    pub fn restrict(&self, from: &LinkageStructure, to: &LinkageStructure) -> Result<Self> {
        if self.kind != WeightKind::Reverse {
            return Err(Error::InvalidParameter(
                "only reverse incidence weights can be restricted to a sample".into(),
            ));
        }
        let weights = to
            .units()
            .iter()
            .map(|&i| {
                from.position(i)
                    .map(|p| self.weights[p].clone())
                    .ok_or(Error::UnknownUnit { unit: i })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(WeightKind::Reverse, to, weights)
    }
}

/// Multiplicity weights `ω_iℓ = 1/m_ℓ`.
pub fn multiplicity_weights(linkage: &LinkageStructure) -> Result<WeightScheme> {
    if linkage.scope() != Scope::Population {
        return Err(Error::RequiresPopulationScope);
    }
    let weights = (0..linkage.units().len())
        .map(|p| {
            linkage
                .alpha_at(p)
                .iter()
                .map(|&l| 1.0 / linkage.m(l) as f64)
                .collect()
        })
        .collect();
    WeightScheme::new(WeightKind::Incidence, linkage, weights)
}

/// Reverse weights with `q` on the best link and `(1-q)/(d_i-1)` on the others.
pub fn reverse_weights_best_link(
    linkage: &LinkageStructure,
    best: &BestLinks,
    q: f64,
) -> Result<WeightScheme> {
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "best-link weight q = {q} is outside (0, 1]"
        )));
    }
    check_best(linkage, best)?;
    let weights = (0..linkage.units().len())
        .map(|p| {
            let alpha = linkage.alpha_at(p);
            let d = alpha.len();
            if d == 1 {
                return vec![1.0];
            }
            let other = (1.0 - q) / (d - 1) as f64;
            alpha
                .iter()
                .map(|&l| if l == best.at(p) { q } else { other })
                .collect()
        })
        .collect();
    WeightScheme::new(WeightKind::Reverse, linkage, weights)
}

/// Full weight on the best link, zero elsewhere.
pub fn best_link_indicator_weights(
    linkage: &LinkageStructure,
    best: &BestLinks,
) -> Result<WeightScheme> {
    reverse_weights_best_link(linkage, best, 1.0)
}

/// Reverse weights `1/d_i`, indifferent over the links of each unit.
pub fn equal_reverse_weights(linkage: &LinkageStructure) -> Result<WeightScheme> {
    let weights = (0..linkage.units().len())
        .map(|p| {
            let d = linkage.alpha_at(p).len();
            vec![1.0 / d as f64; d]
        })
        .collect();
    WeightScheme::new(WeightKind::Reverse, linkage, weights)
}

fn check_best(linkage: &LinkageStructure, best: &BestLinks) -> Result<()> {
    if best.as_slice().len() != linkage.units().len() {
        return Err(Error::DimensionMismatch(
            "best links were built for a different linkage structure".into(),
        ));
    }
    for p in 0..linkage.units().len() {
        if !linkage.alpha_at(p).contains(&best.at(p)) {
            return Err(Error::BestLinkNotLinked {
                unit: linkage.units()[p],
                record: best.at(p),
            });
        }
    }
    Ok(())
}

/// Population-scope totals of the derived covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct PopulationTotals {
    /// `Z` for incidence weights, `X_ω` for reverse weights.
    pub weighted: Vec<f64>,
    /// `X*`, when best links were supplied.
    pub best: Option<Vec<f64>>,
    /// `N_L`.
    pub n_links: usize,
    /// `X_L`.
    pub link_total: Vec<f64>,
    /// `X̄_L = X_L / N_L`.
    pub link_mean: Vec<f64>,
}

/// Per-unit constructed covariates, computed once from `(L, ω, A)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DerivedCovariates {
    kind: WeightKind,
    dim: usize,
    weighted: Vec<f64>,
    best: Option<Vec<f64>>,
    link_sum: Vec<f64>,
    link_count: Vec<usize>,
    totals: Option<PopulationTotals>,
}

impl DerivedCovariates {
    pub fn kind(&self) -> WeightKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `z_i` (incidence) or `x_iω` (reverse) of the unit at position `pos`.
    pub fn weighted(&self, pos: usize) -> &[f64] {
        &self.weighted[pos * self.dim..(pos + 1) * self.dim]
    }

    /// `x*_i`.
    pub fn best(&self, pos: usize) -> Option<&[f64]> {
        self.best
            .as_ref()
            .map(|b| &b[pos * self.dim..(pos + 1) * self.dim])
    }

    /// `x_iL = Σ_{ℓ∈α_i} x_ℓ`.
    pub fn link_sum(&self, pos: usize) -> &[f64] {
        &self.link_sum[pos * self.dim..(pos + 1) * self.dim]
    }

    /// `d_i`.
    pub fn link_count(&self, pos: usize) -> usize {
        self.link_count[pos]
    }

    /// Available only for population-scope linkage.
    pub fn totals(&self) -> Option<&PopulationTotals> {
        self.totals.as_ref()
    }
}

pub fn derive_covariates(
    linkage: &LinkageStructure,
    weights: &WeightScheme,
    aux: &AuxDatabase,
    best: Option<&BestLinks>,
) -> Result<DerivedCovariates> {
    if !weights.matches(linkage) {
        return Err(Error::SchemeMismatch(
            "weights were built for a different linkage structure".into(),
        ));
    }
    if weights.kind() == WeightKind::Incidence && linkage.scope() != Scope::Population {
        return Err(Error::RequiresPopulationScope);
    }
    if linkage.n_records() != aux.len() {
        return Err(Error::DimensionMismatch(format!(
            "linkage over {} records, auxiliary database has {}",
            linkage.n_records(),
            aux.len()
        )));
    }
    if let Some(b) = best {
        check_best(linkage, b)?;
    }

    let dim = aux.dim();
    let n = linkage.units().len();
    let mut weighted = vec![0.0; n * dim];
    let mut link_sum = vec![0.0; n * dim];
    let mut link_count = Vec::with_capacity(n);
    let mut best_rows = best.map(|_| Vec::with_capacity(n * dim));

    for p in 0..n {
        let alpha = linkage.alpha_at(p);
        let w = weights.row(p);
        let zw = &mut weighted[p * dim..(p + 1) * dim];
        let xl = &mut link_sum[p * dim..(p + 1) * dim];
        for (&l, &omega) in alpha.iter().zip(w) {
            for ((z, s), &x) in zw.iter_mut().zip(xl.iter_mut()).zip(aux.row(l)) {
                *z += omega * x;
                *s += x;
            }
        }
        link_count.push(alpha.len());
        if let (Some(rows), Some(b)) = (best_rows.as_mut(), best) {
            rows.extend_from_slice(aux.row(b.at(p)));
        }
    }

    let totals = (linkage.scope() == Scope::Population).then(|| {
        let sum_rows = |v: &[f64]| {
            let mut t = vec![0.0; dim];
            for row in v.chunks_exact(dim) {
                for (a, b) in t.iter_mut().zip(row) {
                    *a += b;
                }
            }
            t
        };
        let link_total = sum_rows(&link_sum);
        let n_links = linkage.n_links();
        PopulationTotals {
            weighted: sum_rows(&weighted),
            best: best_rows.as_deref().map(sum_rows),
            n_links,
            link_mean: link_total.iter().map(|t| t / n_links as f64).collect(),
            link_total,
        }
    });

    Ok(DerivedCovariates {
        kind: weights.kind(),
        dim,
        weighted,
        best: best_rows,
        link_sum,
        link_count,
        totals,
    })
}

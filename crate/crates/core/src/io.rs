//! CSV ingestion and export.
//!
//! Schemas, all with a header row:
//!
//! - auxiliary records: `record_id,x1,...,xp`
//! - links: `unit_id,record_id[,weight][,is_best]`
//! - sample: `unit_id,y,pi[,x1,...,xp]`, where the optional covariates are the
//!   true matched values used by the Ideal estimator
//!
//! Identifiers are arbitrary strings. Records are indexed in file order; units
//! are indexed in sorted order (numerically when every id is an integer).

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use crate::design::Sample;
use crate::error::{Error, Result};
use crate::estimators::EstimatorKind;
use crate::linkage::{
    build_linkage, equal_reverse_weights, multiplicity_weights, AuxDatabase, BestLinks,
    LinkageStructure, MatchSet, Scope, WeightKind, WeightScheme,
};
use crate::pipeline::EstimationContext;
use crate::synthpop::{SyntheticLinkage, SyntheticPopulation};

#[derive(Debug, Clone, PartialEq)]
pub struct AuxFile {
    pub aux: AuxDatabase,
    pub ids: Vec<String>,
    pub columns: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinkRow {
    pub unit: String,
    pub record: String,
    pub weight: Option<f64>,
    pub is_best: Option<bool>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleRow {
    pub unit: String,
    pub y: f64,
    pub pi: f64,
    pub x: Option<Vec<f64>>,
}

/// Everything needed to estimate from files, with ids resolved to indices.
#[derive(Debug, Clone)]
pub struct LoadedInputs {
    pub aux: AuxDatabase,
    pub record_ids: Vec<String>,
    pub unit_ids: Vec<String>,
    pub linkage: LinkageStructure,
    /// `(unit, record, weight)` when the link file has a weight column.
    pub weights: Option<Vec<(usize, usize, f64)>>,
    pub best: Option<BestLinks>,
    pub sample: Sample,
    /// Parallel to `sample.units()`.
    pub y: Vec<f64>,
    /// True covariates of the sampled units, flattened, when supplied.
    pub sample_x: Option<Vec<f64>>,
}

impl LoadedInputs {
    /// `(unit, record, weight)` triples of another link file over the same ids.
    pub fn resolve_weights(&self, rows: &[LinkRow]) -> Result<Vec<(usize, usize, f64)>> {
        let unit: HashMap<&str, usize> =
            self.unit_ids.iter().enumerate().map(|(k, id)| (id.as_str(), k)).collect();
        let record: HashMap<&str, usize> =
            self.record_ids.iter().enumerate().map(|(k, id)| (id.as_str(), k)).collect();
        rows.iter()
            .map(|r| {
                let (Some(&i), Some(&l)) = (unit.get(r.unit.as_str()), record.get(r.record.as_str()))
                else {
                    return Err(Error::InvalidParameter(format!(
                        "weighted link ({}, {}) is not among the links",
                        r.unit, r.record
                    )));
                };
                let w = r.weight.ok_or_else(|| {
                    Error::MissingValue(format!("weight of link ({}, {})", r.unit, r.record))
                })?;
                Ok((i, l, w))
            })
            .collect()
    }

    /// An estimation context holding what `kind` needs.
    ///
    /// Reverse weights come from the link file's weight column, or are split
    /// equally over `α_i` without one. PI takes `incidence` when given and
    /// multiplicity weights otherwise.
    pub fn context_for(
        &self,
        kind: EstimatorKind,
        incidence: Option<&[(usize, usize, f64)]>,
    ) -> Result<EstimationContext> {
        let mut ctx = EstimationContext::new(self.aux.clone(), self.linkage.clone())?;
        match kind {
            EstimatorKind::Pi => {
                if self.linkage.scope() != Scope::Population {
                    return Err(Error::RequiresPopulationScope);
                }
                let w = match incidence {
                    Some(t) => WeightScheme::from_triples(WeightKind::Incidence, &self.linkage, t)?,
                    None => multiplicity_weights(&self.linkage)?,
                };
                ctx = ctx.with_weights(w)?;
            }
            EstimatorKind::Pri | EstimatorKind::Sri | EstimatorKind::Sls => {
                let w = match &self.weights {
                    Some(t) => WeightScheme::from_triples(WeightKind::Reverse, &self.linkage, t)?,
                    None => equal_reverse_weights(&self.linkage)?,
                };
                ctx = ctx.with_weights(w)?;
            }
            EstimatorKind::Sbl => {
                let best = self
                    .best
                    .clone()
                    .ok_or_else(|| Error::MissingValue("is_best column for SBL-GREG".into()))?;
                ctx = ctx.with_best_links(best)?;
            }
            EstimatorKind::Ideal => {
                let sx = self.sample_x.as_ref().ok_or_else(|| {
                    Error::MissingValue("covariate columns in the sample file for Ideal-GREG".into())
                })?;
                let dim = self.aux.dim();
                let mut x = vec![0.0; self.linkage.population_size() * dim];
                for (k, &i) in self.sample.units().iter().enumerate() {
                    x[i * dim..(i + 1) * dim].copy_from_slice(&sx[k * dim..(k + 1) * dim]);
                }
                ctx = ctx.with_unit_covariates(x)?;
            }
            EstimatorKind::Ht | EstimatorKind::Sub => {}
        }
        Ok(ctx)
    }
}

fn reader<R: Read>(input: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(input)
}

fn line_of(record: &csv::StringRecord) -> usize {
    record.position().map_or(0, |p| p.line() as usize)
}

fn parse_f64(record: &csv::StringRecord, idx: usize, name: &str) -> Result<f64> {
    let raw = record.get(idx).unwrap_or("");
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::Parse {
            line: line_of(record),
            message: format!("column '{name}': '{raw}' is not a finite number"),
        })
}

fn column(headers: &csv::StringRecord, name: &str) -> Option<usize> {
    headers.iter().position(|h| h.eq_ignore_ascii_case(name))
}

fn require(headers: &csv::StringRecord, name: &str, file: &str) -> Result<usize> {
    column(headers, name).ok_or_else(|| Error::Parse {
        line: 1,
        message: format!("{file} file has no '{name}' column"),
    })
}

pub fn read_aux<R: Read>(input: R) -> Result<AuxFile> {
    let mut rdr = reader(input);
    let headers = rdr.headers()?.clone();
    let id_col = require(&headers, "record_id", "auxiliary")?;
    let columns: Vec<String> = headers
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != id_col)
        .map(|(_, h)| h.to_string())
        .collect();
    if columns.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "auxiliary file has no covariate columns".into(),
        });
    }
    let mut ids = Vec::new();
    let mut seen = HashMap::new();
    let mut x = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let id = record.get(id_col).unwrap_or("").to_string();
        if seen.insert(id.clone(), ids.len()).is_some() {
            return Err(Error::DuplicateRecord(id));
        }
        for (k, name) in headers.iter().enumerate() {
            if k != id_col {
                x.push(parse_f64(&record, k, name)?);
            }
        }
        ids.push(id);
    }
    let aux = AuxDatabase::from_flat(columns.len(), x)?;
    Ok(AuxFile { aux, ids, columns })
}

pub fn read_links<R: Read>(input: R) -> Result<Vec<LinkRow>> {
    let mut rdr = reader(input);
    let headers = rdr.headers()?.clone();
    let unit_col = require(&headers, "unit_id", "link")?;
    let record_col = require(&headers, "record_id", "link")?;
    let weight_col = column(&headers, "weight");
    let best_col = column(&headers, "is_best");
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let weight = weight_col
            .map(|k| parse_f64(&record, k, "weight"))
            .transpose()?;
        let is_best = best_col
            .map(|k| match record.get(k).unwrap_or("").to_ascii_lowercase().as_str() {
                "1" | "true" | "yes" => Ok(true),
                "0" | "false" | "no" | "" => Ok(false),
                other => Err(Error::Parse {
                    line: line_of(&record),
                    message: format!("column 'is_best': '{other}' is not a boolean"),
                }),
            })
            .transpose()?;
        rows.push(LinkRow {
            unit: record.get(unit_col).unwrap_or("").to_string(),
            record: record.get(record_col).unwrap_or("").to_string(),
            weight,
            is_best,
        });
    }
    Ok(rows)
}

/// `covariates` names the optional true-covariate columns to look for.
pub fn read_sample<R: Read>(input: R, covariates: &[String]) -> Result<Vec<SampleRow>> {
    let mut rdr = reader(input);
    let headers = rdr.headers()?.clone();
    let unit_col = require(&headers, "unit_id", "sample")?;
    let y_col = require(&headers, "y", "sample")?;
    let pi_col = require(&headers, "pi", "sample")?;
    let x_cols: Option<Vec<usize>> = covariates.iter().map(|c| column(&headers, c)).collect();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let x = x_cols
            .as_ref()
            .filter(|c| !c.is_empty())
            .map(|cols| {
                cols.iter()
                    .zip(covariates)
                    .map(|(&k, name)| parse_f64(&record, k, name))
                    .collect::<Result<Vec<_>>>()
            })
            .transpose()?;
        rows.push(SampleRow {
            unit: record.get(unit_col).unwrap_or("").to_string(),
            y: parse_f64(&record, y_col, "y")?,
            pi: parse_f64(&record, pi_col, "pi")?,
            x,
        });
    }
    Ok(rows)
}

fn sorted_ids<'a>(ids: impl Iterator<Item = &'a str>) -> Vec<String> {
    let set: BTreeSet<&str> = ids.collect();
    let mut ids: Vec<String> = set.into_iter().map(str::to_string).collect();
    if ids.iter().all(|s| s.parse::<u64>().is_ok()) {
        ids.sort_by_key(|s| s.parse::<u64>().unwrap_or(0));
    }
    ids
}

/// Resolves ids and builds the linkage structure and sample.
pub fn assemble(
    aux: AuxFile,
    links: &[LinkRow],
    sample_rows: &[SampleRow],
    population_size: usize,
) -> Result<LoadedInputs> {
    let record_index: HashMap<&str, usize> = aux
        .ids
        .iter()
        .enumerate()
        .map(|(k, id)| (id.as_str(), k))
        .collect();
    let unit_ids = sorted_ids(
        links
            .iter()
            .map(|r| r.unit.as_str())
            .chain(sample_rows.iter().map(|r| r.unit.as_str())),
    );
    if unit_ids.len() > population_size {
        return Err(Error::InvalidParameter(format!(
            "{} distinct units exceed the population size {population_size}",
            unit_ids.len()
        )));
    }
    let unit_index: HashMap<&str, usize> = unit_ids
        .iter()
        .enumerate()
        .map(|(k, id)| (id.as_str(), k))
        .collect();

    let mut pairs = Vec::with_capacity(links.len());
    for row in links {
        let i = unit_index[row.unit.as_str()];
        let l = *record_index.get(row.record.as_str()).ok_or_else(|| {
            Error::InvalidParameter(format!(
                "link ({}, {}) references an unknown record",
                row.unit, row.record
            ))
        })?;
        pairs.push((i, l));
    }
    let covered: Vec<usize> = sorted_ids(links.iter().map(|r| r.unit.as_str()))
        .iter()
        .map(|id| unit_index[id.as_str()])
        .collect();
    let linkage = build_linkage(&pairs, &covered, population_size, &aux.aux)?;

    let weights = if links.iter().all(|r| r.weight.is_some()) && !links.is_empty() {
        Some(
            pairs
                .iter()
                .zip(links)
                .map(|(&(i, l), r)| (i, l, r.weight.unwrap_or(0.0)))
                .collect(),
        )
    } else {
        None
    };
    let best = if links.iter().any(|r| r.is_best.is_some()) {
        let best_pairs: Vec<(usize, usize)> = pairs
            .iter()
            .zip(links)
            .filter(|(_, r)| r.is_best == Some(true))
            .map(|(&p, _)| p)
            .collect();
        Some(BestLinks::from_pairs(&linkage, &best_pairs)?)
    } else {
        None
    };

    let units: Vec<usize> = sample_rows.iter().map(|r| unit_index[r.unit.as_str()]).collect();
    let pi: Vec<f64> = sample_rows.iter().map(|r| r.pi).collect();
    let sample = Sample::with_inclusion(population_size, units.clone(), pi)?;
    // Sample sorts its units; carry y and x along.
    let mut order: Vec<usize> = (0..sample_rows.len()).collect();
    order.sort_by_key(|&k| units[k]);
    let y = order.iter().map(|&k| sample_rows[k].y).collect();
    let sample_x = if sample_rows.iter().all(|r| r.x.is_some()) && !sample_rows.is_empty() {
        Some(
            order
                .iter()
                .flat_map(|&k| sample_rows[k].x.clone().unwrap_or_default())
                .collect(),
        )
    } else {
        None
    };

    Ok(LoadedInputs {
        aux: aux.aux,
        record_ids: aux.ids,
        unit_ids,
        linkage,
        weights,
        best,
        sample,
        y,
        sample_x,
    })
}

pub fn load_inputs(
    aux_path: &Path,
    links_path: &Path,
    sample_path: &Path,
    population_size: usize,
) -> Result<LoadedInputs> {
    let aux = read_aux(File::open(aux_path)?)?;
    let links = read_links(File::open(links_path)?)?;
    let sample = read_sample(File::open(sample_path)?, &aux.columns)?;
    assemble(aux, &links, &sample, population_size)
}

pub fn write_aux<W: Write>(out: W, aux: &AuxDatabase) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["record_id".to_string()];
    header.extend((1..=aux.dim()).map(|k| format!("x{k}")));
    w.write_record(&header)?;
    for l in 0..aux.len() {
        let mut row = vec![l.to_string()];
        row.extend(aux.row(l).iter().map(f64::to_string));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Links in `α_i` order, with optional weight and best-link columns.
pub fn write_links<W: Write>(
    out: W,
    linkage: &LinkageStructure,
    weights: Option<&WeightScheme>,
    best: Option<&BestLinks>,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["unit_id", "record_id"];
    if weights.is_some() {
        header.push("weight");
    }
    if best.is_some() {
        header.push("is_best");
    }
    w.write_record(&header)?;
    for (p, &i) in linkage.units().iter().enumerate() {
        for (k, &l) in linkage.alpha_at(p).iter().enumerate() {
            let mut row = vec![i.to_string(), l.to_string()];
            if let Some(ws) = weights {
                row.push(ws.row(p)[k].to_string());
            }
            if let Some(b) = best {
                row.push(u8::from(b.at(p) == l).to_string());
            }
            w.write_record(&row)?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_sample<W: Write>(out: W, sample: &Sample, y: &[f64]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["unit_id", "y", "pi"])?;
    for ((&i, &v), &p) in sample.units().iter().zip(y).zip(sample.pi()) {
        w.write_record([i.to_string(), v.to_string(), p.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_population<W: Write>(out: W, population: &SyntheticPopulation) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["unit_id", "y", "x1"])?;
    for (i, (y, x)) in population.y.iter().zip(&population.x).enumerate() {
        w.write_record([i.to_string(), y.to_string(), x.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_matches<W: Write>(out: W, matches: &MatchSet) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["unit_id", "record_id"])?;
    for (i, l) in matches.pairs() {
        w.write_record([i.to_string(), l.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `population.csv`, `aux.csv`, `links.csv` (reverse weights and best
/// links), `incidence.csv` (when given) and `matches.csv` into `dir`.
pub fn dump_simulation(
    dir: &Path,
    population: &SyntheticPopulation,
    generated: &SyntheticLinkage,
    reverse: Option<&WeightScheme>,
    incidence: Option<&WeightScheme>,
) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    write_population(File::create(dir.join("population.csv"))?, population)?;
    write_aux(File::create(dir.join("aux.csv"))?, &population.aux())?;
    write_links(
        File::create(dir.join("links.csv"))?,
        &generated.linkage,
        reverse,
        Some(&generated.best),
    )?;
    if let Some(w) = incidence {
        write_links(File::create(dir.join("incidence.csv"))?, &generated.linkage, Some(w), None)?;
    }
    write_matches(File::create(dir.join("matches.csv"))?, &generated.matches)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const AUX: &str = "record_id,x1\nr1,0.5\nr2,1.5\nr3,2.5\n";

    #[test]
    fn string_ids_are_resolved() {
        let aux = read_aux(AUX.as_bytes()).unwrap();
        let links = read_links("unit_id,record_id,weight,is_best\nb,r1,1,1\na,r2,0.25,0\na,r3,0.75,true\n".as_bytes()).unwrap();
        let sample = read_sample("unit_id,y,pi\nb,2.0,0.5\na,4.0,0.5\n".as_bytes(), &aux.columns).unwrap();
        let inputs = assemble(aux, &links, &sample, 4).unwrap();
        assert_eq!(inputs.unit_ids, vec!["a", "b"]);
        assert_eq!(inputs.linkage.alpha(0).unwrap(), &[1, 2]);
        assert_eq!(inputs.sample.units(), &[0, 1]);
        assert_eq!(inputs.y, vec![4.0, 2.0]);
        assert_eq!(inputs.best.unwrap().as_slice(), &[2, 0]);
        assert_eq!(inputs.weights.unwrap()[1], (0, 1, 0.25));
    }

    #[test]
    fn numeric_ids_sort_numerically() {
        assert_eq!(sorted_ids(["10", "9", "100"].into_iter()), vec!["9", "10", "100"]);
        assert_eq!(sorted_ids(["b", "10", "a"].into_iter()), vec!["10", "a", "b"]);
    }

    #[test]
    fn schema_errors() {
        let err = read_sample("unit_id,y\n1,2\n".as_bytes(), &[]).unwrap_err();
        assert!(err.to_string().contains("'pi'"), "{err}");
        let err = read_aux("record_id,x1\nr1,abc\n".as_bytes()).unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }), "{err}");
        assert!(matches!(
            read_aux("record_id,x1\nr1,1\nr1,2\n".as_bytes()),
            Err(Error::DuplicateRecord(_))
        ));
        let aux = read_aux(AUX.as_bytes()).unwrap();
        let links = read_links("unit_id,record_id\n1,r9\n".as_bytes()).unwrap();
        assert!(assemble(aux, &links, &[], 3).is_err());
    }

    #[test]
    fn written_files_read_back() {
        let aux = AuxDatabase::from_scalars(&[0.1, 1.0 / 3.0, 2.0f64.sqrt()]).unwrap();
        let mut buf = Vec::new();
        write_aux(&mut buf, &aux).unwrap();
        let back = read_aux(buf.as_slice()).unwrap();
        assert_eq!(back.aux, aux);
    }
}

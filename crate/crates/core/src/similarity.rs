//! Pearson similarity profiling of labeled samples.
//!
//! Two views are computed. The inter-class view builds, for each subject, a
//! K×K matrix whose (i, j) entry is the mean correlation between a class-i
//! sample and a class-j sample of that subject. The inter-person view builds,
//! for each class, an S×S matrix over subjects. Diagonal entries pair two
//! distinct samples of the same cell.
//!
//! Each matrix row is summarised as self-similarity (the diagonal),
//! cross-similarity (mean of the off-diagonal row entries) and the
//! percentage difference `(SS - CS) / SS`.

use std::io::Write;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng;

pub const DEFAULT_PAIR_BUDGET: usize = 1000;

/// Pearson correlation with the sample (`n - 1`) convention.
///
/// Computed as `sum(da * db) / sqrt(sum(da^2) * sum(db^2))`, which is
/// exactly symmetric in its arguments and gives exactly 1 for `a == b`.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Dimension {
            expected: a.len(),
            got: b.len(),
        });
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::UndefinedCorrelation(format!(
            "need at least 2 elements, got {n}"
        )));
    }
    let mean_a = a.iter().sum::<f64>() / n as f64;
    let mean_b = b.iter().sum::<f64>() / n as f64;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        let dx = x - mean_a;
        let dy = y - mean_b;
        sab += dx * dy;
        saa += dx * dx;
        sbb += dy * dy;
    }
    if saa == 0.0 || sbb == 0.0 {
        return Err(Error::UndefinedCorrelation("constant input vector".into()));
    }
    Ok((sab / (saa * sbb).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// K×K matrix for one subject.
    Class,
    /// S×S matrix for one class.
    Person,
}

impl Axis {
    fn name(self) -> &'static str {
        match self {
            Axis::Class => "class",
            Axis::Person => "person",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationMatrix {
    pub values: Vec<Vec<f64>>,
    pub axis: Axis,
    /// Subject index (class axis) or class index (person axis); `None` for averages.
    pub condition: Option<usize>,
}

impl CorrelationMatrix {
    pub fn from_values(values: Vec<Vec<f64>>, axis: Axis, condition: Option<usize>) -> Result<Self> {
        let n = values.len();
        if n == 0 {
            return Err(Error::Input("correlation matrix must be non-empty".into()));
        }
        for (i, row) in values.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: row.len(),
                });
            }
            for (j, &v) in row.iter().enumerate() {
                if !(-1.0..=1.0).contains(&v) {
                    return Err(Error::Input(format!("entry ({i},{j}) = {v} outside [-1, 1]")));
                }
                if (v - values[j][i]).abs() > 1e-9 {
                    return Err(Error::Input(format!("matrix not symmetric at ({i},{j})")));
                }
            }
        }
        Ok(Self {
            values,
            axis,
            condition,
        })
    }

    pub fn size(&self) -> usize {
        self.values.len()
    }

    /// Elementwise mean of same-sized matrices.
    pub fn average(matrices: &[CorrelationMatrix]) -> Result<Self> {
        let first = matrices
            .first()
            .ok_or_else(|| Error::Input("cannot average zero matrices".into()))?;
        let n = first.size();
        let mut acc = vec![vec![0.0; n]; n];
        for m in matrices {
            if m.size() != n {
                return Err(Error::Dimension {
                    expected: n,
                    got: m.size(),
                });
            }
            for (acc_row, row) in acc.iter_mut().zip(&m.values) {
                for (a, v) in acc_row.iter_mut().zip(row) {
                    *a += v;
                }
            }
        }
        let count = matrices.len() as f64;
        for row in &mut acc {
            for a in row.iter_mut() {
                *a /= count;
            }
        }
        Ok(Self {
            values: acc,
            axis: first.axis,
            condition: None,
        })
    }
}

/// Self-similarity, cross-similarity and percentage difference of one row.
///
/// `cross_similarity` is `None` for a 1×1 matrix. `percentage_difference`
/// is a fraction (0.0344 for 3.44%) and is `None` when it is undefined
/// (no cross term, or zero self-similarity).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityRow {
    pub self_similarity: f64,
    pub cross_similarity: Option<f64>,
    pub percentage_difference: Option<f64>,
}

impl SimilarityRow {
    pub fn new(self_similarity: f64, cross_similarity: Option<f64>) -> Self {
        let percentage_difference = match cross_similarity {
            Some(cs) if self_similarity != 0.0 => Some((self_similarity - cs) / self_similarity),
            _ => None,
        };
        Self {
            self_similarity,
            cross_similarity,
            percentage_difference,
        }
    }

    /// `SS - CS`, the margin behind the "self above cross" hypothesis.
    pub fn margin(&self) -> Option<f64> {
        self.cross_similarity.map(|cs| self.self_similarity - cs)
    }
}

pub fn similarity_stats(m: &CorrelationMatrix, index: usize) -> Result<SimilarityRow> {
    let row = m.values.get(index).ok_or_else(|| {
        Error::Input(format!(
            "row {index} out of range for a {}x{} matrix",
            m.size(),
            m.size()
        ))
    })?;
    let ss = row[index];
    let off: Vec<f64> = row
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != index)
        .map(|(_, &v)| v)
        .collect();
    let cs = (!off.is_empty()).then(|| off.iter().sum::<f64>() / off.len() as f64);
    Ok(SimilarityRow::new(ss, cs))
}

/// min, max, range, mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SummaryStats {
    pub min: f64,
    pub max: f64,
    pub range: f64,
    pub mean: f64,
    pub std: f64,
}

impl SummaryStats {
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let min = values.iter().copied().fold(f64::INFINITY, f64::min);
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Some(Self {
            min,
            max,
            range: max - min,
            mean,
            std: var.sqrt(),
        })
    }
}

type StatPick = fn(&SummaryStats) -> f64;

// ---------------------------------------------------------------------------
// Matrix construction
// ---------------------------------------------------------------------------

/// Sample indices per (class, subject) cell.
fn cell_index(ds: &Dataset) -> Vec<Vec<Vec<usize>>> {
    let mut cells = vec![vec![Vec::new(); ds.num_subjects()]; ds.num_classes()];
    for (i, s) in ds.samples().iter().enumerate() {
        cells[s.label][s.subject].push(i);
    }
    cells
}

fn short_cells(cells: &[Vec<Vec<usize>>], pick: impl Fn(usize, usize) -> bool) -> Vec<String> {
    let mut out = Vec::new();
    for (c, row) in cells.iter().enumerate() {
        for (s, idx) in row.iter().enumerate() {
            if pick(c, s) && idx.len() < 2 {
                out.push(format!("(class {c}, subject {s}: {} samples)", idx.len()));
            }
        }
    }
    out
}

/// Mean correlation between members of `a` and `b` (distinct pairs when `same`).
///
/// Enumerates every pair when there are at most `budget` of them, otherwise
/// draws `budget` pairs uniformly with replacement.
fn cell_mean(
    ds: &Dataset,
    a: &[usize],
    b: &[usize],
    same: bool,
    budget: usize,
    prng: &mut rng::Rng,
) -> Result<f64> {
    let x = |i: usize| ds.samples()[i].features.as_slice();
    let total = if same {
        a.len() * (a.len().saturating_sub(1)) / 2
    } else {
        a.len() * b.len()
    };
    let mut sum = 0.0;
    let count;
    if total <= budget {
        count = total;
        if same {
            for p in 0..a.len() {
                for q in p + 1..a.len() {
                    sum += pearson(x(a[p]), x(a[q]))?;
                }
            }
        } else {
            for &p in a {
                for &q in b {
                    sum += pearson(x(p), x(q))?;
                }
            }
        }
    } else {
        count = budget;
        for _ in 0..budget {
            let (p, q) = if same {
                let p = prng.random_range(0..a.len());
                let mut q = prng.random_range(0..a.len() - 1);
                if q >= p {
                    q += 1;
                }
                (a[p], a[q])
            } else {
                (a[prng.random_range(0..a.len())], b[prng.random_range(0..b.len())])
            };
            sum += pearson(x(p), x(q))?;
        }
    }
    Ok(sum / count as f64)
}

fn build_matrix(
    ds: &Dataset,
    groups: &[&[usize]],
    axis: Axis,
    condition: usize,
    pair_budget: usize,
    seed: u64,
) -> Result<CorrelationMatrix> {
    if pair_budget == 0 {
        return Err(Error::Input("pair_budget must be positive".into()));
    }
    let n = groups.len();
    let mut values = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let mut prng = rng::derived(seed, &format!("{}/{condition}/{i}/{j}", axis.name()));
            let v = cell_mean(ds, groups[i], groups[j], i == j, pair_budget, &mut prng)?;
            values[i][j] = v;
            values[j][i] = v;
        }
    }
    Ok(CorrelationMatrix {
        values,
        axis,
        condition: Some(condition),
    })
}

pub fn inter_class_matrix(
    ds: &Dataset,
    subject: usize,
    pair_budget: usize,
    seed: u64,
) -> Result<CorrelationMatrix> {
    if subject >= ds.num_subjects() {
        return Err(Error::Input(format!("subject {subject} out of range")));
    }
    let cells = cell_index(ds);
    let short = short_cells(&cells, |_, s| s == subject);
    if !short.is_empty() {
        return Err(Error::InsufficientData(format!(
            "need >= 2 samples per cell: {}",
            short.join(", ")
        )));
    }
    let groups: Vec<&[usize]> = cells.iter().map(|row| row[subject].as_slice()).collect();
    build_matrix(ds, &groups, Axis::Class, subject, pair_budget, seed)
}

pub fn inter_person_matrix(
    ds: &Dataset,
    class: usize,
    pair_budget: usize,
    seed: u64,
) -> Result<CorrelationMatrix> {
    if class >= ds.num_classes() {
        return Err(Error::Input(format!("class {class} out of range")));
    }
    let cells = cell_index(ds);
    let short = short_cells(&cells, |c, _| c == class);
    if !short.is_empty() {
        return Err(Error::InsufficientData(format!(
            "need >= 2 samples per cell: {}",
            short.join(", ")
        )));
    }
    let groups: Vec<&[usize]> = cells[class].iter().map(Vec::as_slice).collect();
    build_matrix(ds, &groups, Axis::Person, class, pair_budget, seed)
}

// ---------------------------------------------------------------------------
// Report
// ---------------------------------------------------------------------------

/// Summary of the SS, CS and PD columns of a set of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowSummary {
    pub self_similarity: Option<SummaryStats>,
    pub cross_similarity: Option<SummaryStats>,
    pub percentage_difference: Option<SummaryStats>,
}

impl RowSummary {
    pub fn of(rows: &[SimilarityRow]) -> Self {
        let ss: Vec<f64> = rows.iter().map(|r| r.self_similarity).collect();
        let cs: Vec<f64> = rows.iter().filter_map(|r| r.cross_similarity).collect();
        let pd: Vec<f64> = rows.iter().filter_map(|r| r.percentage_difference).collect();
        Self {
            self_similarity: SummaryStats::of(&ss),
            cross_similarity: SummaryStats::of(&cs),
            percentage_difference: SummaryStats::of(&pd),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterClassSection {
    pub per_subject: Vec<CorrelationMatrix>,
    pub average: CorrelationMatrix,
    /// One row per class, from the averaged matrix.
    pub rows: Vec<SimilarityRow>,
    /// Per matrix column of the averaged matrix.
    pub column_summary: Vec<SummaryStats>,
    pub row_summary: RowSummary,
}

impl InterClassSection {
    /// Row statistics and summaries of an already averaged matrix.
    pub fn from_average(per_subject: Vec<CorrelationMatrix>, average: CorrelationMatrix) -> Result<Self> {
        let k = average.size();
        let rows = (0..k)
            .map(|i| similarity_stats(&average, i))
            .collect::<Result<Vec<_>>>()?;
        let column_summary = (0..k)
            .map(|j| {
                let col: Vec<f64> = average.values.iter().map(|r| r[j]).collect();
                SummaryStats::of(&col).expect("non-empty column")
            })
            .collect();
        let row_summary = RowSummary::of(&rows);
        Ok(Self {
            per_subject,
            average,
            rows,
            column_summary,
            row_summary,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterPersonSection {
    pub per_class: Vec<CorrelationMatrix>,
    pub average: CorrelationMatrix,
    /// `cells[class][subject]`, each from that class's own matrix.
    pub cells: Vec<Vec<SimilarityRow>>,
    /// Per class, summarised over subjects.
    pub class_summary: Vec<RowSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimilarityReport {
    pub pair_budget: usize,
    pub seed: u64,
    pub correlation: String,
    pub inter_class: InterClassSection,
    /// `None` when the dataset has a single subject.
    pub inter_person: Option<InterPersonSection>,
}

pub fn similarity_report(ds: &Dataset, pair_budget: usize, seed: u64) -> Result<SimilarityReport> {
    let cells = cell_index(ds);
    let short = short_cells(&cells, |_, _| true);
    if !short.is_empty() {
        return Err(Error::InsufficientData(format!(
            "need >= 2 samples per cell: {}",
            short.join(", ")
        )));
    }

    let per_subject = (0..ds.num_subjects())
        .map(|s| inter_class_matrix(ds, s, pair_budget, seed))
        .collect::<Result<Vec<_>>>()?;
    let average = CorrelationMatrix::average(&per_subject)?;
    let inter_class = InterClassSection::from_average(per_subject, average)?;

    let inter_person = if ds.num_subjects() > 1 {
        let per_class = (0..ds.num_classes())
            .map(|c| inter_person_matrix(ds, c, pair_budget, seed))
            .collect::<Result<Vec<_>>>()?;
        let average = CorrelationMatrix::average(&per_class)?;
        let cells = per_class
            .iter()
            .map(|m| {
                (0..m.size())
                    .map(|s| similarity_stats(m, s))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let class_summary = cells
            .iter()
            .map(|rows: &Vec<SimilarityRow>| RowSummary::of(rows))
            .collect();
        Some(InterPersonSection {
            per_class,
            average,
            cells,
            class_summary,
        })
    } else {
        None
    };

    Ok(SimilarityReport {
        pair_budget,
        seed,
        correlation: "pearson (sample std)".into(),
        inter_class,
        inter_person,
    })
}

// ---------------------------------------------------------------------------
// Hypotheses
// ---------------------------------------------------------------------------

/// Self-similarity above cross-similarity in every row of both views.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfAboveCross {
    pub holds: bool,
    pub inter_class_holds: bool,
    /// `None` when the inter-person view is not applicable.
    pub inter_person_holds: Option<bool>,
    pub inter_class_margins: Vec<Option<f64>>,
    /// `[class][subject]`
    pub inter_person_margins: Option<Vec<Vec<Option<f64>>>>,
    pub min_margin: Option<f64>,
    pub failing: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassSeparability {
    pub class: usize,
    pub percentage_difference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonConsistency {
    pub class: usize,
    pub mean_percentage_difference: Option<f64>,
    pub std_percentage_difference: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisCheck {
    pub self_above_cross: SelfAboveCross,
    /// Classes by descending inter-class PD; higher is expected to classify better.
    pub class_ranking: Vec<ClassSeparability>,
    /// Per class, mean and STD of inter-person PD across subjects.
    pub person_consistency: Option<Vec<PersonConsistency>>,
}

pub fn check_hypotheses(report: &SimilarityReport) -> HypothesisCheck {
    check_rows(
        &report.inter_class.rows,
        report.inter_person.as_ref().map(|p| p.cells.as_slice()),
    )
}

/// Hypothesis check over raw rows: per-class inter-class rows, and optional
/// inter-person rows indexed `[class][subject]`.
pub fn check_rows(
    class_rows: &[SimilarityRow],
    person_cells: Option<&[Vec<SimilarityRow>]>,
) -> HypothesisCheck {
    let mut failing = Vec::new();
    let mut all_margins = Vec::new();

    let inter_class_margins: Vec<Option<f64>> = class_rows.iter().map(SimilarityRow::margin).collect();
    for (c, m) in inter_class_margins.iter().enumerate() {
        if let Some(m) = *m {
            all_margins.push(m);
            if m <= 0.0 {
                failing.push(format!("inter-class: class {c} (SS - CS = {m:.4})"));
            }
        }
    }
    let inter_class_holds = inter_class_margins.iter().flatten().all(|&m| m > 0.0);

    let inter_person_margins: Option<Vec<Vec<Option<f64>>>> = person_cells.map(|cells| {
        cells
            .iter()
            .map(|row| row.iter().map(SimilarityRow::margin).collect())
            .collect()
    });
    let inter_person_holds = inter_person_margins.as_ref().map(|cells| {
        let mut ok = true;
        for (c, row) in cells.iter().enumerate() {
            for (s, m) in row.iter().enumerate() {
                if let Some(m) = *m {
                    all_margins.push(m);
                    if m <= 0.0 {
                        ok = false;
                        failing.push(format!("inter-person: class {c}, subject {s} (SS - CS = {m:.4})"));
                    }
                }
            }
        }
        ok
    });

    let min_margin = all_margins.iter().copied().reduce(f64::min);

    let mut class_ranking: Vec<ClassSeparability> = class_rows
        .iter()
        .enumerate()
        .map(|(class, r)| ClassSeparability {
            class,
            percentage_difference: r.percentage_difference,
        })
        .collect();
    class_ranking.sort_by(|a, b| {
        let key = |x: &ClassSeparability| x.percentage_difference.unwrap_or(f64::NEG_INFINITY);
        key(b).total_cmp(&key(a)).then(a.class.cmp(&b.class))
    });

    let person_consistency = person_cells.map(|cells| {
        cells
            .iter()
            .enumerate()
            .map(|(class, rows)| {
                let pd: Vec<f64> = rows.iter().filter_map(|r| r.percentage_difference).collect();
                let stats = SummaryStats::of(&pd);
                PersonConsistency {
                    class,
                    mean_percentage_difference: stats.map(|s| s.mean),
                    std_percentage_difference: stats.map(|s| s.std),
                }
            })
            .collect()
    });

    HypothesisCheck {
        self_above_cross: SelfAboveCross {
            holds: inter_class_holds && inter_person_holds.unwrap_or(true),
            inter_class_holds,
            inter_person_holds,
            inter_class_margins,
            inter_person_margins,
            min_margin,
            failing,
        },
        class_ranking,
        person_consistency,
    }
}

// ---------------------------------------------------------------------------
// CSV tables
// ---------------------------------------------------------------------------

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// Averaged inter-class matrix followed by SS, CS, PD columns, then
/// min/max/range/average/std footer rows. PD is a fraction.
pub fn write_inter_class_csv<W: Write>(section: &InterClassSection, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let k = section.average.size();
    let mut header = vec!["class".to_string()];
    header.extend((0..k).map(|j| j.to_string()));
    header.extend(["ss", "cs", "pd"].map(String::from));
    w.write_record(&header)?;
    for (i, row) in section.rows.iter().enumerate() {
        let mut rec = vec![i.to_string()];
        rec.extend(section.average.values[i].iter().map(|v| v.to_string()));
        rec.push(row.self_similarity.to_string());
        rec.push(fmt_opt(row.cross_similarity));
        rec.push(fmt_opt(row.percentage_difference));
        w.write_record(&rec)?;
    }
    let pick: [(&str, StatPick); 5] = [
        ("min", |s| s.min),
        ("max", |s| s.max),
        ("range", |s| s.range),
        ("average", |s| s.mean),
        ("std", |s| s.std),
    ];
    let rs = &section.row_summary;
    for (name, f) in pick {
        let mut rec = vec![name.to_string()];
        rec.extend(section.column_summary.iter().map(|s| f(s).to_string()));
        for col in [rs.self_similarity, rs.cross_similarity, rs.percentage_difference] {
            rec.push(fmt_opt(col.as_ref().map(f)));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per subject with SS, CS, PD per class, then summary rows.
pub fn write_inter_person_csv<W: Write>(section: &InterPersonSection, writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    let k = section.cells.len();
    let s_count = section.cells.first().map_or(0, Vec::len);
    let mut header = vec!["subject".to_string()];
    for c in 0..k {
        header.extend([
            format!("class{c}_ss"),
            format!("class{c}_cs"),
            format!("class{c}_pd"),
        ]);
    }
    w.write_record(&header)?;
    for s in 0..s_count {
        let mut rec = vec![s.to_string()];
        for rows in &section.cells {
            let r = rows[s];
            rec.push(r.self_similarity.to_string());
            rec.push(fmt_opt(r.cross_similarity));
            rec.push(fmt_opt(r.percentage_difference));
        }
        w.write_record(&rec)?;
    }
    let pick: [(&str, StatPick); 5] = [
        ("min", |s| s.min),
        ("max", |s| s.max),
        ("range", |s| s.range),
        ("average", |s| s.mean),
        ("std", |s| s.std),
    ];
    for (name, f) in pick {
        let mut rec = vec![name.to_string()];
        for summary in &section.class_summary {
            for col in [
                summary.self_similarity,
                summary.cross_similarity,
                summary.percentage_difference,
            ] {
                rec.push(fmt_opt(col.as_ref().map(f)));
            }
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

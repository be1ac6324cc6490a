use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{NormSpec, Point};
use crate::model::{evaluate, Assignment, ContinuousType, DemandPoint, DiscreteType, Instance, Solution};
use crate::solvers::SolveReport;

/// Schema version written into every document and required when reading.
pub const FORMAT_VERSION: u32 = 1;

fn default_weight() -> f64 {
    1.0
}

fn default_norm() -> NormSpec {
    NormSpec::L2
}

fn is_l2(n: &NormSpec) -> bool {
    *n == NormSpec::L2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandDoc {
    pub coords: Vec<f64>,
    #[serde(default = "default_weight")]
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SiteDoc {
    pub coords: Vec<f64>,
    pub radius: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscreteDoc {
    pub sites: Vec<SiteDoc>,
    pub count: usize,
    /// Norm measuring site coverage; ℓ2 when omitted.
    #[serde(default = "default_norm", skip_serializing_if = "is_l2")]
    pub norm: NormSpec,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuousDoc {
    pub norm: NormSpec,
    pub radius: f64,
    pub count: usize,
}

/// On-disk form of an [`Instance`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDoc {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub dimension: usize,
    pub demand: Vec<DemandDoc>,
    #[serde(default)]
    pub discrete_types: Vec<DiscreteDoc>,
    #[serde(default)]
    pub continuous_types: Vec<ContinuousDoc>,
}

impl InstanceDoc {
    pub fn from_instance(instance: &Instance) -> Self {
        InstanceDoc {
            version: FORMAT_VERSION,
            name: instance.name().map(str::to_string),
            seed: None,
            dimension: instance.dim(),
            demand: instance
                .demand()
                .iter()
                .map(|d| DemandDoc { coords: d.point.coords().to_vec(), weight: d.weight })
                .collect(),
            discrete_types: instance
                .discrete_types()
                .iter()
                .map(|t| DiscreteDoc {
                    sites: t
                        .sites
                        .iter()
                        .zip(&t.radii)
                        .map(|(s, &radius)| SiteDoc { coords: s.coords().to_vec(), radius })
                        .collect(),
                    count: t.count,
                    norm: t.norm,
                })
                .collect(),
            continuous_types: instance
                .continuous_types()
                .iter()
                .map(|t| ContinuousDoc { norm: t.norm, radius: t.radius, count: t.count })
                .collect(),
        }
    }

    /// Validates the document into an instance.
    pub fn to_instance(&self) -> Result<Instance> {
        check_version(self.version)?;
        let demand =
            self.demand.iter().map(|d| DemandPoint { point: Point::new(d.coords.clone()), weight: d.weight }).collect();
        let discrete = self
            .discrete_types
            .iter()
            .map(|t| {
                let sites = t.sites.iter().map(|s| Point::new(s.coords.clone())).collect();
                let radii = t.sites.iter().map(|s| s.radius).collect();
                DiscreteType { norm: t.norm, ..DiscreteType::new(sites, radii, t.count) }
            })
            .collect();
        let continuous = self.continuous_types.iter().map(|t| ContinuousType::new(t.norm, t.radius, t.count)).collect();
        let instance = Instance::new(self.dimension, demand, discrete, continuous)?;
        Ok(match &self.name {
            Some(n) => instance.with_name(n.clone()),
            None => instance,
        })
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }
}

fn check_version(version: u32) -> Result<()> {
    if version != FORMAT_VERSION {
        return Err(Error::input(format!("unsupported document version {version}, expected {FORMAT_VERSION}")));
    }
    Ok(())
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("documents serialize");
    s.push('\n');
    s
}

/// Deserializes JSON, reporting the offending field path and position.
fn from_json<T: DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        Error::Parse { path, message: format!("line {}, column {}: {}", inner.line(), inner.column(), inner) }
    })
}

pub fn parse_instance_doc(text: &str) -> Result<InstanceDoc> {
    from_json(text)
}

/// Parses and validates an instance document; coincident demand points are merged.
pub fn parse_instance(text: &str) -> Result<Instance> {
    parse_instance_doc(text)?.to_instance()
}

pub fn emit_instance(instance: &Instance) -> String {
    InstanceDoc::from_instance(instance).to_json()
}

/// Reads raw demand from CSV rows `x, y[, weight]` (for example lon, lat,
/// population). A first row that does not parse as numbers is taken as a header.
pub fn read_points_csv<R: std::io::Read>(reader: R) -> Result<Vec<DemandPoint>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).flexible(true).from_reader(reader);
    let mut out = Vec::new();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let nums: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let nums = match nums {
            Ok(v) => v,
            Err(_) if row == 0 => continue,
            Err(e) => return Err(Error::Parse { path: format!("row {}", row + 1), message: e.to_string() }),
        };
        match nums.as_slice() {
            [x, y] => out.push(DemandPoint { point: Point::xy(*x, *y), weight: 1.0 }),
            [x, y, w] => out.push(DemandPoint { point: Point::xy(*x, *y), weight: *w }),
            _ => {
                return Err(Error::Parse {
                    path: format!("row {}", row + 1),
                    message: format!("expected 2 or 3 columns, found {}", nums.len()),
                })
            }
        }
    }
    Ok(out)
}

/// Loads an instance document from disk.
pub fn read_instance(path: &Path) -> Result<Instance> {
    let text =
        std::fs::read_to_string(path).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))?;
    parse_instance(&text).map_err(|e| match e {
        Error::Parse { path: field, message } => Error::Parse { path: format!("{}: {field}", path.display()), message },
        other => other,
    })
}

/// On-disk form of a solved assignment. Timings are left out so that
/// identical solves produce identical documents.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolutionDoc {
    pub version: u32,
    pub method: String,
    pub status: String,
    pub objective: f64,
    /// Best proven bound; absent when none is known.
    pub bound: Option<f64>,
    pub gap: Option<f64>,
    /// Open site indices per discrete type.
    pub open_sites: Vec<Vec<usize>>,
    /// Centers per continuous type.
    pub centers: Vec<Vec<Vec<f64>>>,
    /// Points credited to each discrete type.
    pub discrete_cover: Vec<Vec<usize>>,
    /// Points credited to each slot of each continuous type.
    pub continuous_cover: Vec<Vec<Vec<usize>>>,
    /// Every covered point.
    pub covered: Vec<usize>,
}

fn indices(flags: &[bool]) -> Vec<usize> {
    flags.iter().enumerate().filter(|(_, &f)| f).map(|(i, _)| i).collect()
}

fn finite(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

impl SolutionDoc {
    pub fn from_report(instance: &Instance, report: &SolveReport) -> Self {
        let s = &report.solution;
        let a = &s.assignment;
        SolutionDoc {
            version: FORMAT_VERSION,
            method: report.method.to_string(),
            status: report.status.to_string(),
            objective: s.objective,
            bound: finite(report.bound),
            gap: finite(report.gap),
            open_sites: a.open_sites.clone(),
            centers: s.continuous_centers.iter().map(|cs| cs.iter().map(|c| c.coords().to_vec()).collect()).collect(),
            discrete_cover: a.discrete_cover.iter().map(|f| indices(f)).collect(),
            continuous_cover: a
                .continuous_cover
                .iter()
                .map(|slots| slots.iter().map(|f| indices(f)).collect())
                .collect(),
            covered: indices(&evaluate(instance, s).covered),
        }
    }

    /// Rebuilds the solution against `instance`; the stored objective is kept.
    pub fn to_solution(&self, instance: &Instance) -> Result<Solution> {
        check_version(self.version)?;
        let n = instance.n();
        let flags = |idx: &[usize]| -> Result<Vec<bool>> {
            let mut f = vec![false; n];
            for &i in idx {
                *f.get_mut(i).ok_or_else(|| Error::input(format!("point index {i} out of range")))? = true;
            }
            Ok(f)
        };
        let assignment = Assignment {
            open_sites: self.open_sites.clone(),
            discrete_cover: self.discrete_cover.iter().map(|idx| flags(idx)).collect::<Result<_>>()?,
            continuous_cover: self
                .continuous_cover
                .iter()
                .map(|slots| slots.iter().map(|idx| flags(idx)).collect::<Result<_>>())
                .collect::<Result<_>>()?,
        };
        let continuous_centers =
            self.centers.iter().map(|cs| cs.iter().map(|c| Point::new(c.clone())).collect()).collect();
        Ok(Solution { assignment, continuous_centers, objective: self.objective })
    }

    pub fn to_json(&self) -> String {
        to_json(self)
    }
}

pub fn emit_solution(instance: &Instance, report: &SolveReport) -> String {
    SolutionDoc::from_report(instance, report).to_json()
}

pub fn parse_solution_doc(text: &str) -> Result<SolutionDoc> {
    from_json(text)
}

pub fn parse_solution(text: &str, instance: &Instance) -> Result<Solution> {
    parse_solution_doc(text)?.to_solution(instance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::SolveLimits;
    use crate::solvers::{solve_bips, SolveOptions};

    const MINIMAL: &str = r#"{
        "version": 1,
        "dimension": 2,
        "demand": [{"coords": [0.5, 0.5], "weight": 2}],
        "continuous_types": [{"norm": {"kind": "l2"}, "radius": 0.1, "count": 1}]
    }"#;

    #[test]
    fn minimal_document() {
        let i = parse_instance(MINIMAL).unwrap();
        assert_eq!(i.n(), 1);
        assert_eq!(i.weight(0), 2.0);
        assert_eq!(i.continuous_types()[0].count, 1);
    }

    #[test]
    fn negative_weight_is_validation_error() {
        let doc = MINIMAL.replace("\"weight\": 2", "\"weight\": -1");
        assert!(matches!(parse_instance(&doc), Err(Error::Validation(v)) if v.iter().any(|m| m.contains("weight"))));
    }

    #[test]
    fn duplicates_merge() {
        let doc = MINIMAL.replace(
            r#"[{"coords": [0.5, 0.5], "weight": 2}]"#,
            r#"[{"coords": [0.5, 0.5], "weight": 2}, {"coords": [0.5, 0.5], "weight": 3}]"#,
        );
        let i = parse_instance(&doc).unwrap();
        assert_eq!(i.n(), 1);
        assert_eq!(i.weight(0), 5.0);
    }

    #[test]
    fn unknown_field_reports_path() {
        let doc = MINIMAL.replace("\"radius\": 0.1", "\"radius\": 0.1, \"colour\": 3");
        match parse_instance(&doc) {
            Err(Error::Parse { path, message }) => {
                assert!(path.starts_with("continuous_types[0]"), "{path}");
                assert!(message.contains("line 5"), "{message}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn wrong_version_rejected() {
        let doc = MINIMAL.replace("\"version\": 1", "\"version\": 7");
        assert!(matches!(parse_instance(&doc), Err(Error::Input(_))));
    }

    #[test]
    fn lp_norm_and_discrete_round_trip() {
        let text = r#"{
            "version": 1, "name": "mixed", "dimension": 2,
            "demand": [{"coords": [0, 0]}, {"coords": [1, 0.5], "weight": 4}],
            "discrete_types": [{"sites": [{"coords": [0, 0], "radius": 0.3}], "count": 1}],
            "continuous_types": [{"norm": {"kind": "lp", "tau": 3}, "radius": 0.2, "count": 2}]
        }"#;
        let i = parse_instance(text).unwrap();
        assert_eq!(i.name(), Some("mixed"));
        assert_eq!(i.continuous_types()[0].norm, NormSpec::Lp { tau: 3.0 });
        let again = parse_instance(&emit_instance(&i)).unwrap();
        assert_eq!(again, i);
        assert_eq!(emit_instance(&again), emit_instance(&i));
    }

    #[test]
    fn csv_points_with_header() {
        let data = "lon,lat,weight\n-73.9, 40.7, 12\n-73.8,40.8,3\n";
        let pts = read_points_csv(data.as_bytes()).unwrap();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0].weight, 12.0);
        assert_eq!(pts[1].point, Point::xy(-73.8, 40.8));
        assert!(read_points_csv("1,2\nx,3\n".as_bytes()).is_err());
    }

    #[test]
    fn solution_round_trip() {
        let i = parse_instance(
            r#"{"version": 1, "dimension": 2,
                "demand": [{"coords": [0, 0]}, {"coords": [0.15, 0]}, {"coords": [0.9, 0.9], "weight": 3}],
                "continuous_types": [{"norm": {"kind": "l2"}, "radius": 0.1, "count": 1}]}"#,
        )
        .unwrap();
        let opts = SolveOptions { limits: SolveLimits::unlimited(), ..SolveOptions::default() };
        let r = solve_bips(&i, &opts).unwrap();
        let text = emit_solution(&i, &r);
        let doc = parse_solution_doc(&text).unwrap();
        assert_eq!(doc.covered, vec![2]);
        let s = doc.to_solution(&i).unwrap();
        let ev = evaluate(&i, &s);
        assert!(ev.is_valid(), "{:?}", ev.violations);
        assert_eq!(ev.objective, r.objective());
        assert_eq!(SolutionDoc::from_report(&i, &SolveReport { solution: s, ..r }).to_json(), text);
    }
}

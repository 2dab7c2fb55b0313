//! On-disk formats: JSON and CSV codecs for the public objects.
//!
//! All helpers work on strings; callers own file IO. JSON is pretty-printed
//! with a trailing newline and numbers in shortest round-trip form, so equal
//! inputs produce byte-identical output. Parsing validates through the same
//! constructors the rest of the crate uses, so a malformed file surfaces as
//! a [`Error::Format`] or as the constructor's own error, never as a
//! silently odd object.
//!
//! Shapes:
//! * step function: `{ "dim": 1, "depth": k, "values": [..] }`, or CSV with
//!   one leaf value per line (depth inferred, the count must be a power of
//!   two);
//! * admissible pair: `{ "dim", "depth", "S": [[..] per generation],
//!   "M": [[..]], "mbar" }`;
//! * grid candidate: `{ "mbar", "x": [..], "y": [..], "values": [[..]] }`
//!   with `values[i][j] = B(x[i], y[j])`;
//! * search result: every field of [`SearchResult`], winners encoded as
//!   coefficient objects `{ "dim", "depth", "mean", "coeffs" }`.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::bellman::BellmanCandidate;
use crate::error::{Error, Result};
use crate::haar::{HaarCoefficients, StepFunction};
use crate::lattice::LatticeSpec;
use crate::lemma::{AdmissiblePair, NodeFunctional};
use crate::scalar::{real, Scalar};
use crate::search::{Certificate, SearchConfig, SearchResult};

fn to_pretty<S: Serialize>(value: &S) -> Result<String> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Error::Format(format!("serialization failed: {e}")))?;
    text.push('\n');
    Ok(text)
}

fn from_json_str<D: DeserializeOwned>(text: &str, what: &str) -> Result<D> {
    serde_json::from_str(text).map_err(|e| Error::Format(format!("invalid {what} JSON: {e}")))
}

#[derive(Serialize, Deserialize)]
struct StepFunctionRepr<T> {
    dim: u32,
    depth: u32,
    values: Vec<T>,
}

pub fn step_function_to_json<T: Scalar + Serialize>(f: &StepFunction<T>) -> Result<String> {
    to_pretty(&StepFunctionRepr {
        dim: f.spec().dim(),
        depth: f.spec().depth(),
        values: f.values().to_vec(),
    })
}

pub fn step_function_from_json<T: Scalar + DeserializeOwned>(
    text: &str,
) -> Result<StepFunction<T>> {
    let repr: StepFunctionRepr<T> = from_json_str(text, "step function")?;
    if repr.dim != 1 {
        return Err(Error::Format(format!(
            "step functions live on dim-1 lattices, file says dim {}",
            repr.dim
        )));
    }
    StepFunction::new(LatticeSpec::new(1, repr.depth)?, repr.values)
}

/// One leaf value per line, no header.
pub fn step_function_to_csv<T: Scalar>(f: &StepFunction<T>) -> String {
    let mut out = String::new();
    for v in f.values() {
        out.push_str(&format!("{v}\n"));
    }
    out
}

/// Parse a flat CSV; the line count must be a power of two, which fixes the
/// depth.
pub fn step_function_from_csv<T: Scalar>(text: &str) -> Result<StepFunction<T>> {
    let mut values = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|e| Error::Format(format!("line {}: {e}", i + 1)))?;
        values.push(real::<T>(v));
    }
    if values.is_empty() {
        return Err(Error::Format("no values in CSV".into()));
    }
    if !values.len().is_power_of_two() {
        return Err(Error::Format(format!(
            "{} values cannot fill a dyadic lattice (need a power of two)",
            values.len()
        )));
    }
    let depth = values.len().trailing_zeros();
    StepFunction::new(LatticeSpec::new(1, depth)?, values)
}

#[derive(Serialize, Deserialize)]
struct PairRepr<T> {
    dim: u32,
    depth: u32,
    #[serde(rename = "S")]
    s: Vec<Vec<T>>,
    #[serde(rename = "M")]
    m: Vec<Vec<T>>,
    mbar: Option<T>,
}

pub fn pair_to_json<T: Scalar + Serialize>(pair: &AdmissiblePair<T>) -> Result<String> {
    to_pretty(&PairRepr {
        dim: pair.spec().dim(),
        depth: pair.spec().depth(),
        s: pair.s().per_generation().to_vec(),
        m: pair.m().per_generation().to_vec(),
        mbar: Some(pair.mbar()),
    })
}

/// Parse and validate an externally produced pair; `tol` is the slack
/// allowed on the admissibility checks (external data may carry rounding).
pub fn pair_from_json<T: Scalar + DeserializeOwned>(
    text: &str,
    tol: T,
) -> Result<AdmissiblePair<T>> {
    let repr: PairRepr<T> = from_json_str(text, "admissible pair")?;
    let spec = LatticeSpec::new(repr.dim, repr.depth)?;
    let s = NodeFunctional::new(spec, repr.s)?;
    let m = NodeFunctional::new(spec, repr.m)?;
    AdmissiblePair::new(s, m, repr.mbar, tol)
}

#[derive(Serialize, Deserialize)]
struct GridRepr<T> {
    mbar: T,
    x: Vec<T>,
    y: Vec<T>,
    values: Vec<Vec<T>>,
}

pub fn grid_candidate_to_json<T: Scalar + Serialize>(
    mbar: T,
    x: &[T],
    y: &[T],
    values: &[Vec<T>],
) -> Result<String> {
    to_pretty(&GridRepr {
        mbar,
        x: x.to_vec(),
        y: y.to_vec(),
        values: values.to_vec(),
    })
}

pub fn grid_candidate_from_json<T: Scalar + DeserializeOwned>(
    text: &str,
) -> Result<BellmanCandidate<T>> {
    let repr: GridRepr<T> = from_json_str(text, "grid candidate")?;
    BellmanCandidate::from_grid(repr.mbar, repr.x, repr.y, repr.values)
}

#[derive(Serialize, Deserialize)]
struct CoefficientsRepr<T> {
    dim: u32,
    depth: u32,
    mean: T,
    coeffs: Vec<T>,
}

impl<T: Scalar> CoefficientsRepr<T> {
    fn of(h: &HaarCoefficients<T>) -> Self {
        CoefficientsRepr {
            dim: h.spec().dim(),
            depth: h.spec().depth(),
            mean: h.mean(),
            coeffs: h.coeffs().to_vec(),
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
struct SearchResultRepr<T: Scalar> {
    config: SearchConfig,
    best_ratio: T,
    f_star: CoefficientsRepr<T>,
    phi_star: CoefficientsRepr<T>,
    history: Vec<T>,
    certificate: Certificate<T>,
}

pub fn search_result_to_json<T: Scalar + Serialize>(result: &SearchResult<T>) -> Result<String> {
    to_pretty(&SearchResultRepr {
        config: result.config,
        best_ratio: result.best_ratio,
        f_star: CoefficientsRepr::of(&result.f_star),
        phi_star: CoefficientsRepr::of(&result.phi_star),
        history: result.history.clone(),
        certificate: result.certificate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{random_admissible_pair, random_step_function};
    use crate::lattice::NodeId;
    use crate::search::{search, Strategy};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn step_function_json_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f: StepFunction<f64> = random_step_function(5, &mut rng).unwrap();
        let text = step_function_to_json(&f).unwrap();
        let back: StepFunction<f64> = step_function_from_json(&text).unwrap();
        assert_eq!(f.values(), back.values());
        assert_eq!(f.spec(), back.spec());
        // Serialization is stable byte for byte.
        assert_eq!(text, step_function_to_json(&back).unwrap());
    }

    #[test]
    fn step_function_csv_round_trip_infers_depth() {
        let h: StepFunction<f64> = StepFunction::haar(3, NodeId::new(1, 0)).unwrap();
        let text = step_function_to_csv(&h);
        let back: StepFunction<f64> = step_function_from_csv(&text).unwrap();
        assert_eq!(back.spec().depth(), 3);
        assert_eq!(h.values(), back.values());
    }

    #[test]
    fn bad_inputs_are_format_errors() {
        assert!(matches!(
            step_function_from_json::<f64>("{"),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            step_function_from_json::<f64>(
                "{\"dim\": 2, \"depth\": 1, \"values\": [0.0, 0.0]}"
            ),
            Err(Error::Format(_))
        ));
        // Wrong value count is a lattice error from the constructor.
        assert!(step_function_from_json::<f64>(
            "{\"dim\": 1, \"depth\": 2, \"values\": [1.0]}"
        )
        .is_err());
        assert!(matches!(
            step_function_from_csv::<f64>("1.0\n2.0\n3.0\n"),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            step_function_from_csv::<f64>("1.0\nnot-a-number\n"),
            Err(Error::Format(_))
        ));
        assert!(matches!(step_function_from_csv::<f64>(""), Err(Error::Format(_))));
    }

    #[test]
    fn csv_allows_comments_and_blank_lines() {
        let f: StepFunction<f64> =
            step_function_from_csv("# manifest-ish header\n1.0\n\n-1.0\n").unwrap();
        assert_eq!(f.values(), &[1.0, -1.0]);
    }

    #[test]
    fn pair_json_round_trip_preserves_everything() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pair: AdmissiblePair<f64> =
            random_admissible_pair(LatticeSpec::new(2, 3).unwrap(), &mut rng).unwrap();
        let text = pair_to_json(&pair).unwrap();
        let back: AdmissiblePair<f64> = pair_from_json(&text, 0.0).unwrap();
        assert_eq!(pair.s().per_generation(), back.s().per_generation());
        assert_eq!(pair.m().per_generation(), back.m().per_generation());
        assert_eq!(pair.mbar(), back.mbar());
    }

    #[test]
    fn pair_json_without_mbar_defaults_to_max_m() {
        let text = r#"{
            "dim": 1, "depth": 1,
            "S": [[0.0], [1.0, 1.0]],
            "M": [[0.75], [0.5, 0.25]]
        }"#;
        let pair: AdmissiblePair<f64> = pair_from_json(text, 1e-12).unwrap();
        assert_eq!(pair.mbar(), 0.75);
    }

    #[test]
    fn inadmissible_pair_files_are_rejected() {
        let text = r#"{
            "dim": 1, "depth": 1,
            "S": [[0.0], [1.0, 0.5]],
            "M": [[0.75], [0.5, 0.25]],
            "mbar": 0.75
        }"#;
        assert!(matches!(
            pair_from_json::<f64>(text, 1e-9),
            Err(Error::Inadmissible(_))
        ));
    }

    #[test]
    fn grid_candidate_json_loads_and_evaluates() {
        let mbar = 1.0f64;
        let cand = BellmanCandidate::sample(mbar).unwrap();
        let xs: Vec<f64> = (0..40).map(|i| 1e-3 * 1.5f64.powi(i)).collect();
        let ys: Vec<f64> = (0..11).map(|j| j as f64 * 0.1).collect();
        let values: Vec<Vec<f64>> = xs
            .iter()
            .map(|&x| ys.iter().map(|&y| cand.value(x, y).unwrap()).collect())
            .collect();
        let text = grid_candidate_to_json(mbar, &xs, &ys, &values).unwrap();
        let grid: BellmanCandidate<f64> = grid_candidate_from_json(&text).unwrap();
        let x = xs[20];
        assert_eq!(grid.value(x, 0.5).unwrap(), cand.value(x, 0.5).unwrap());
    }

    #[test]
    fn search_result_json_carries_all_fields() {
        let config = crate::search::SearchConfig {
            depth: 2,
            iterations: 1,
            seed: 1,
            strategy: Strategy::Random,
            restarts: 1,
        };
        let result = search::<f64>(&config).unwrap();
        let text = search_result_to_json(&result).unwrap();
        let value: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert_eq!(value["best_ratio"], 0.25);
        assert_eq!(value["config"]["strategy"], "random");
        assert_eq!(value["f_star"]["coeffs"][0], 1.0);
        assert!(value["certificate"]["tl_norm"].is_number());
        assert_eq!(value["history"].as_array().unwrap().len(), 1);
    }
}

//! Parameter-study experiment expansion and script generation.
//!
//! A config carries one-to-one `parameters` plus an ordered `experiments`
//! set whose value lists expand into the cartesian product, one assignment
//! per permutation. Each assignment substitutes into a script template and
//! lands in its own run directory.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::workflow::{Job, JobKind, Workflow};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(String),
    #[error("experiments list '{0}' is empty")]
    EmptyExperimentList(String),
    #[error("key '{0}' appears in both parameters and experiments")]
    KeyCollision(String),
    #[error("unresolved placeholder {{{0}}}")]
    UnresolvedPlaceholder(String),
    #[error("unbalanced '{{' in template")]
    UnbalancedBrace,
    #[error("slug collision: {0}")]
    SlugCollision(String),
    #[error("output directory {0} already exists (use force to overwrite)")]
    OutdirExists(PathBuf),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A scalar config value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Scalar {
    Bool(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

impl fmt::Display for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scalar::Bool(b) => write!(f, "{b}"),
            Scalar::Int(i) => write!(f, "{i}"),
            // Shortest round-trip rendering.
            Scalar::Float(x) => write!(f, "{x}"),
            Scalar::Text(s) => f.write_str(s),
        }
    }
}

/// Experiment configuration: one-to-one substitutions plus the ordered
/// permutation set.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    #[serde(default)]
    pub parameters: IndexMap<String, Scalar>,
    #[serde(default)]
    pub experiments: IndexMap<String, Vec<Scalar>>,
}

impl ExperimentConfig {
    /// Parse the YAML config format (`name`, `parameters`, `experiments`).
    pub fn from_yaml(text: &str) -> Result<Self, ExperimentError> {
        let config: ExperimentConfig =
            serde_yaml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        for key in self.experiments.keys() {
            if self.parameters.contains_key(key) {
                return Err(ExperimentError::KeyCollision(key.clone()));
            }
        }
        for (key, values) in &self.experiments {
            if values.is_empty() {
                return Err(ExperimentError::EmptyExperimentList(key.clone()));
            }
        }
        Ok(())
    }
}

/// One concrete parameter assignment with its directory slug.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub values: IndexMap<String, Scalar>,
    pub slug: String,
}

fn slug_fragment(text: &str) -> String {
    text.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || matches!(c, '.' | '_' | '-' | '+' | '=' | '@') {
                c
            } else {
                '_'
            }
        })
        .collect()
}

/// Expand the config into the cartesian product of its experiment lists.
///
/// Ordering is row-major with the last experiments key varying fastest;
/// every assignment also carries all one-to-one parameters. With no
/// experiments there is exactly one assignment.
pub fn expand(config: &ExperimentConfig) -> Result<Vec<Assignment>, ExperimentError> {
    config.validate()?;

    let keys: Vec<&String> = config.experiments.keys().collect();
    let lists: Vec<&Vec<Scalar>> = config.experiments.values().collect();
    let total: usize = lists.iter().map(|l| l.len()).product();

    let mut assignments = Vec::with_capacity(total);
    let mut indices = vec![0usize; keys.len()];
    for _ in 0..total {
        let mut values = config.parameters.clone();
        let mut slug_parts = Vec::with_capacity(keys.len());
        for (k, &i) in indices.iter().enumerate() {
            let value = lists[k][i].clone();
            slug_parts.push(format!(
                "{}_{}",
                slug_fragment(keys[k]),
                slug_fragment(&value.to_string())
            ));
            values.insert(keys[k].clone(), value);
        }
        let slug = if slug_parts.is_empty() {
            slug_fragment(&config.name)
        } else {
            slug_parts.join("-")
        };
        assignments.push(Assignment { values, slug });

        // Advance odometer; last key varies fastest.
        for k in (0..indices.len()).rev() {
            indices[k] += 1;
            if indices[k] < lists[k].len() {
                break;
            }
            indices[k] = 0;
        }
    }

    let mut seen = std::collections::BTreeSet::new();
    for assignment in &assignments {
        if !seen.insert(assignment.slug.clone()) {
            return Err(ExperimentError::SlugCollision(assignment.slug.clone()));
        }
    }
    Ok(assignments)
}

/// Substituted template text plus any assignment keys it never used.
#[derive(Debug, Clone, PartialEq)]
pub struct Substituted {
    pub text: String,
    pub unused_keys: Vec<String>,
}

/// Replace `{name}` placeholders with assignment values. `{{` and `}}`
/// escape literal braces. A placeholder without a value is an error;
/// unused assignment keys are reported, not rejected.
pub fn substitute(template: &str, assignment: &Assignment) -> Result<Substituted, ExperimentError> {
    let mut out = String::with_capacity(template.len());
    let mut used = std::collections::BTreeSet::new();
    let mut chars = template.chars().peekable();

    while let Some(c) = chars.next() {
        match c {
            '{' => {
                if chars.peek() == Some(&'{') {
                    chars.next();
                    out.push('{');
                    continue;
                }
                let mut name = String::new();
                loop {
                    match chars.next() {
                        Some('}') => break,
                        Some(c) => name.push(c),
                        None => return Err(ExperimentError::UnbalancedBrace),
                    }
                }
                match assignment.values.get(&name) {
                    Some(value) => {
                        used.insert(name);
                        out.push_str(&value.to_string());
                    }
                    None => return Err(ExperimentError::UnresolvedPlaceholder(name)),
                }
            }
            '}' => {
                if chars.peek() == Some(&'}') {
                    chars.next();
                }
                out.push('}');
            }
            c => out.push(c),
        }
    }

    let unused_keys = assignment
        .values
        .keys()
        .filter(|k| !used.contains(*k))
        .cloned()
        .collect();
    Ok(Substituted {
        text: out,
        unused_keys,
    })
}

pub const SCRIPT_FILE: &str = "run.sh";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const INDEX_FILE: &str = "index.txt";

/// One generated run directory.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratedRun {
    pub assignment: Assignment,
    pub script_path: PathBuf,
    pub manifest_path: PathBuf,
}

/// All run directories generated from one config and template.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratedRunSet {
    pub root: PathBuf,
    pub runs: Vec<GeneratedRun>,
}

/// Materialize one directory per assignment under `outdir`, each holding
/// the substituted script and the assignment manifest, plus a top-level
/// index of slugs. Two runs over the same inputs produce byte-identical
/// scripts and manifests.
pub fn generate(
    config: &ExperimentConfig,
    template: &str,
    outdir: &Path,
    force: bool,
) -> Result<GeneratedRunSet, ExperimentError> {
    if outdir.exists() {
        if !force {
            return Err(ExperimentError::OutdirExists(outdir.to_path_buf()));
        }
        fs::remove_dir_all(outdir)?;
    }
    fs::create_dir_all(outdir)?;

    let assignments = expand(config)?;
    let mut runs = Vec::with_capacity(assignments.len());
    let mut index = String::new();
    for assignment in assignments {
        let dir = outdir.join(&assignment.slug);
        fs::create_dir_all(&dir)?;

        let script = substitute(template, &assignment)?;
        let script_path = dir.join(SCRIPT_FILE);
        fs::write(&script_path, script.text.as_bytes())?;
        set_executable(&script_path)?;

        let manifest_path = dir.join(MANIFEST_FILE);
        let manifest = serde_json::to_string_pretty(&assignment.values)
            .expect("assignment serializes");
        fs::write(&manifest_path, format!("{manifest}\n"))?;

        index.push_str(&assignment.slug);
        index.push('\n');
        runs.push(GeneratedRun {
            assignment,
            script_path,
            manifest_path,
        });
    }
    fs::write(outdir.join(INDEX_FILE), index)?;

    Ok(GeneratedRunSet {
        root: outdir.to_path_buf(),
        runs,
    })
}

#[cfg(unix)]
fn set_executable(path: &Path) -> std::io::Result<()> {
    use std::os::unix::fs::PermissionsExt;
    let mut perms = fs::metadata(path)?.permissions();
    perms.set_mode(0o755);
    fs::set_permissions(path, perms)
}

#[cfg(not(unix))]
fn set_executable(_path: &Path) -> std::io::Result<()> {
    Ok(())
}

/// Turn a generated run set into a workflow of independent local jobs,
/// one per assignment.
pub fn submit(runset: &GeneratedRunSet, name: &str) -> Workflow {
    let jobs = runset
        .runs
        .iter()
        .map(|run| Job {
            name: run.assignment.slug.clone(),
            kind: JobKind::Local,
            command: Some(format!("sh {}", run.script_path.display())),
            depends_on: Vec::new(),
            env: None,
            workdir: run.script_path.parent().map(|p| p.to_path_buf()),
        })
        .collect();
    Workflow::new(name, jobs).expect("independent jobs form a valid workflow")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(
        parameters: &[(&str, Scalar)],
        experiments: &[(&str, Vec<Scalar>)],
    ) -> ExperimentConfig {
        ExperimentConfig {
            name: "study".into(),
            parameters: parameters
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
            experiments: experiments
                .iter()
                .map(|(k, v)| (k.to_string(), v.clone()))
                .collect(),
        }
    }

    fn ints(values: &[i64]) -> Vec<Scalar> {
        values.iter().map(|v| Scalar::Int(*v)).collect()
    }

    fn texts(values: &[&str]) -> Vec<Scalar> {
        values.iter().map(|v| Scalar::Text(v.to_string())).collect()
    }

    #[test]
    fn two_by_three_expands_in_row_major_order_last_key_fastest() {
        let cfg = config(&[], &[("a", ints(&[1, 2])), ("b", texts(&["x", "y", "z"]))]);
        let assignments = expand(&cfg).unwrap();
        assert_eq!(assignments.len(), 6);
        let got: Vec<(String, String)> = assignments
            .iter()
            .map(|a| {
                (
                    a.values["a"].to_string(),
                    a.values["b"].to_string(),
                )
            })
            .collect();
        let expected = [
            ("1", "x"),
            ("1", "y"),
            ("1", "z"),
            ("2", "x"),
            ("2", "y"),
            ("2", "z"),
        ]
        .map(|(a, b)| (a.to_string(), b.to_string()));
        assert_eq!(got, expected.to_vec());
        assert_eq!(assignments[0].slug, "a_1-b_x");
        assert_eq!(assignments[5].slug, "a_2-b_z");
    }

    #[test]
    fn no_experiments_yields_exactly_one_assignment() {
        let cfg = config(&[("d", Scalar::Text("/tmp".into()))], &[]);
        let assignments = expand(&cfg).unwrap();
        assert_eq!(assignments.len(), 1);
        assert_eq!(assignments[0].values["d"], Scalar::Text("/tmp".into()));
    }

    #[test]
    fn single_key_sweep_counts_its_values() {
        let cfg = config(&[], &[("epochs", ints(&[2, 30, 70]))]);
        let assignments = expand(&cfg).unwrap();
        assert_eq!(assignments.len(), 3);
        let epochs: Vec<String> = assignments
            .iter()
            .map(|a| a.values["epochs"].to_string())
            .collect();
        assert_eq!(epochs, vec!["2", "30", "70"]);
    }

    #[test]
    fn parameter_and_experiment_key_collision_is_rejected() {
        let cfg = config(&[("a", Scalar::Int(0))], &[("a", ints(&[1]))]);
        assert!(matches!(
            expand(&cfg),
            Err(ExperimentError::KeyCollision(_))
        ));
    }

    #[test]
    fn empty_experiment_list_is_rejected() {
        let cfg = config(&[], &[("a", vec![])]);
        assert!(matches!(
            expand(&cfg),
            Err(ExperimentError::EmptyExperimentList(_))
        ));
    }

    #[test]
    fn substitute_replaces_placeholders() {
        let cfg = config(&[], &[("epochs", ints(&[2]))]);
        let assignment = expand(&cfg).unwrap().remove(0);
        let result = substitute("run --epochs={epochs}", &assignment).unwrap();
        assert_eq!(result.text, "run --epochs=2");
        assert!(result.unused_keys.is_empty());
    }

    #[test]
    fn missing_placeholder_value_is_an_error() {
        let cfg = config(&[], &[]);
        let assignment = expand(&cfg).unwrap().remove(0);
        assert!(matches!(
            substitute("{missing}", &assignment),
            Err(ExperimentError::UnresolvedPlaceholder(name)) if name == "missing"
        ));
    }

    #[test]
    fn template_without_placeholders_is_unchanged_and_reports_unused() {
        let cfg = config(&[("d", Scalar::Text("/tmp".into()))], &[]);
        let assignment = expand(&cfg).unwrap().remove(0);
        let result = substitute("echo hi", &assignment).unwrap();
        assert_eq!(result.text, "echo hi");
        assert_eq!(result.unused_keys, vec!["d".to_string()]);
    }

    #[test]
    fn braces_escape() {
        let cfg = config(&[("x", Scalar::Int(7))], &[]);
        let assignment = expand(&cfg).unwrap().remove(0);
        let result = substitute("json {{\"x\": {x}}}", &assignment).unwrap();
        assert_eq!(result.text, "json {\"x\": 7}");
    }

    #[test]
    fn yaml_config_round_trip_preserves_experiment_order() {
        let text = "name: study\nparameters:\n  data: /tmp/in\nexperiments:\n  epochs: [1, 2]\n  lr: [0.1, 0.01]\n";
        let cfg = ExperimentConfig::from_yaml(text).unwrap();
        assert_eq!(cfg.name, "study");
        let keys: Vec<&String> = cfg.experiments.keys().collect();
        assert_eq!(keys, ["epochs", "lr"]);
        let assignments = expand(&cfg).unwrap();
        assert_eq!(assignments.len(), 4);
        assert_eq!(assignments[0].slug, "epochs_1-lr_0.1");
    }

    #[test]
    fn generate_writes_one_directory_per_assignment_plus_index() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("runs");
        let cfg = config(&[], &[("a", ints(&[1, 2])), ("b", texts(&["x", "y", "z"]))]);
        let runset = generate(&cfg, "echo a={a} b={b}", &out, false).unwrap();
        assert_eq!(runset.runs.len(), 6);
        let index = fs::read_to_string(out.join(INDEX_FILE)).unwrap();
        assert_eq!(index.lines().count(), 6);
        for run in &runset.runs {
            assert!(run.script_path.is_file());
            let manifest: IndexMap<String, Scalar> =
                serde_json::from_str(&fs::read_to_string(&run.manifest_path).unwrap()).unwrap();
            assert_eq!(manifest, run.assignment.values);
        }
        let script = fs::read_to_string(&runset.runs[0].script_path).unwrap();
        assert_eq!(script, "echo a=1 b=x");
    }

    #[test]
    fn generate_refuses_existing_outdir_without_force() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("runs");
        let cfg = config(&[], &[("a", ints(&[1]))]);
        generate(&cfg, "echo {a}", &out, false).unwrap();
        assert!(matches!(
            generate(&cfg, "echo {a}", &out, false),
            Err(ExperimentError::OutdirExists(_))
        ));
        generate(&cfg, "echo {a}", &out, true).unwrap();
    }

    #[test]
    fn generate_is_reproducible() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = config(
            &[("data", Scalar::Text("/tmp/in".into()))],
            &[("epochs", ints(&[1, 2])), ("lr", vec![Scalar::Float(0.1)])],
        );
        let out_a = dir.path().join("a");
        let out_b = dir.path().join("b");
        let a = generate(&cfg, "train --epochs={epochs} --lr={lr} {data}", &out_a, false).unwrap();
        let b = generate(&cfg, "train --epochs={epochs} --lr={lr} {data}", &out_b, false).unwrap();
        for (ra, rb) in a.runs.iter().zip(&b.runs) {
            assert_eq!(
                fs::read(&ra.script_path).unwrap(),
                fs::read(&rb.script_path).unwrap()
            );
            assert_eq!(
                fs::read(&ra.manifest_path).unwrap(),
                fs::read(&rb.manifest_path).unwrap()
            );
        }
    }

    #[test]
    fn submit_builds_independent_jobs() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("runs");
        let cfg = config(&[], &[("a", ints(&[1, 2])), ("b", texts(&["x", "y", "z"]))]);
        let runset = generate(&cfg, "echo {a}{b}", &out, false).unwrap();
        let workflow = submit(&runset, "study");
        assert_eq!(workflow.jobs.len(), 6);
        assert!(workflow.edges().is_empty());
    }

    #[test]
    fn submit_of_empty_runset_is_an_empty_workflow() {
        let runset = GeneratedRunSet {
            root: PathBuf::from("/nonexistent"),
            runs: Vec::new(),
        };
        let workflow = submit(&runset, "empty");
        assert!(workflow.jobs.is_empty());
    }
}

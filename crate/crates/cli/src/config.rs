//! Flat key/value pipeline configuration.
//!
//! A config file holds one `key = value` pair per line; `#` starts a
//! comment. Every key has a default, file values override defaults, and
//! `--set key=value` flags override the file. The effective map is echoed
//! into every report for provenance.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{bail, Context, Result};
use bdstate_core::kelm::Weighting;
use bdstate_core::pipeline::{
    default_alpha_grid, default_gamma_grid, ClassifierSpec, GammaSpec, PreprocessSpec,
};
use bdstate_core::preprocess::TreeParams;
use bdstate_core::types::{ClassSet, Modality};

/// Keys recognized in config files; anything else is a hard error.
const KNOWN_KEYS: &[&str] = &[
    "classes",
    "functionals",
    "pca",
    "tree_select",
    "tree_count",
    "tree_depth",
    "tree_min_leaf",
    "z",
    "l2",
    "classifier",
    "c_grid",
    "c_unweighted_grid",
    "c_weighted_grid",
    "gamma_grid",
    "alpha_grid",
    "fusion",
    "fallback",
    "dirichlet_draws",
    "folds",
    "stratified",
    "seed",
    "missing_class",
];

#[derive(Debug, Clone)]
pub struct Config {
    entries: BTreeMap<String, String>,
}

impl Default for Config {
    fn default() -> Self {
        let mut entries = BTreeMap::new();
        let defaults: &[(&str, &str)] = &[
            ("classes", "remission,hypomania,mania"),
            ("functionals", "bd10"),
            ("pca", "none"),
            ("tree_select", "false"),
            ("tree_count", "250"),
            ("tree_depth", "0"),
            ("tree_min_leaf", "1"),
            ("z", "true"),
            ("l2", "true"),
            ("classifier", "fused"),
            ("c_grid", "1,10,100,1000,10000,100000"),
            ("c_unweighted_grid", ""),
            ("c_weighted_grid", ""),
            ("gamma_grid", "default"),
            ("alpha_grid", "default"),
            ("fusion", "majority"),
            ("fallback", "acoustic"),
            ("dirichlet_draws", "500"),
            ("folds", "4"),
            ("stratified", "true"),
            ("seed", "42"),
            ("missing_class", "hypomania"),
        ];
        for (k, v) in defaults {
            entries.insert((*k).into(), (*v).into());
        }
        Self { entries }
    }
}

impl Config {
    /// Loads a config file over the defaults; `path` may be absent.
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let mut config = Self::default();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            for (idx, line) in text.lines().enumerate() {
                let line = line.trim();
                if line.is_empty() || line.starts_with('#') {
                    continue;
                }
                let Some((key, value)) = line.split_once('=') else {
                    bail!(
                        "config {}:{}: expected `key = value`, got {line:?}",
                        path.display(),
                        idx + 1
                    );
                };
                config.set(key.trim(), value.trim())?;
            }
        }
        Ok(config)
    }

    /// Applies `--set key=value` style overrides on top.
    pub fn apply_overrides(&mut self, overrides: &[String]) -> Result<()> {
        for spec in overrides {
            let Some((key, value)) = spec.split_once('=') else {
                bail!("override {spec:?} is not of the form key=value");
            };
            self.set(key.trim(), value.trim())?;
        }
        Ok(())
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        if !KNOWN_KEYS.contains(&key) {
            bail!("unknown config key {key:?}");
        }
        self.entries.insert(key.into(), value.into());
        Ok(())
    }

    fn get(&self, key: &str) -> &str {
        self.entries
            .get(key)
            .map(String::as_str)
            .expect("every known key has a default")
    }

    /// The effective settings, for report provenance.
    pub fn echo(&self) -> BTreeMap<String, String> {
        self.entries
            .iter()
            .filter(|(_, v)| !v.is_empty())
            .map(|(k, v)| (format!("config.{k}"), v.clone()))
            .collect()
    }

    pub fn classes(&self) -> Result<ClassSet> {
        let names: Vec<String> = self
            .get("classes")
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        Ok(ClassSet::new(names)?)
    }

    pub fn functionals(&self) -> Result<&str> {
        let v = self.get("functionals");
        if v != "bd10" {
            bail!("unknown functional set {v:?} (only bd10 is available)");
        }
        Ok(v)
    }

    pub fn seed(&self) -> Result<u64> {
        parse_num(self.get("seed"), "seed")
    }

    pub fn folds(&self) -> Result<usize> {
        parse_num(self.get("folds"), "folds")
    }

    pub fn stratified(&self) -> Result<bool> {
        parse_bool(self.get("stratified"), "stratified")
    }

    pub fn dirichlet_draws(&self) -> Result<usize> {
        let n: usize = parse_num(self.get("dirichlet_draws"), "dirichlet_draws")?;
        if n == 0 {
            bail!("dirichlet_draws must be at least 1");
        }
        Ok(n)
    }

    pub fn fallback(&self) -> Modality {
        Modality::parse(self.get("fallback"))
    }

    pub fn fusion_method(&self) -> Result<&str> {
        let v = self.get("fusion");
        match v {
            "majority" | "wsum2" | "wsum3" | "early" => Ok(v),
            other => bail!("unknown fusion method {other:?}"),
        }
    }

    pub fn missing_class_index(&self, classes: &ClassSet) -> Result<usize> {
        let name = self.get("missing_class");
        classes
            .index_of(name)
            .with_context(|| format!("missing_class {name:?} is not in the class set"))
    }

    pub fn preprocess_spec(&self) -> Result<PreprocessSpec> {
        let pca_variance = match self.get("pca") {
            "none" | "" => None,
            v => {
                let f: f64 = parse_num(v, "pca")?;
                if !(f > 0.0 && f <= 1.0) {
                    bail!("pca variance fraction {f} outside (0, 1]");
                }
                Some(f)
            }
        };
        let tree_select = if parse_bool(self.get("tree_select"), "tree_select")? {
            let depth: usize = parse_num(self.get("tree_depth"), "tree_depth")?;
            Some(TreeParams {
                n_trees: parse_num(self.get("tree_count"), "tree_count")?,
                max_depth: if depth == 0 { None } else { Some(depth) },
                min_leaf: parse_num(self.get("tree_min_leaf"), "tree_min_leaf")?,
                seed: self.seed()?,
            })
        } else {
            None
        };
        Ok(PreprocessSpec {
            pca_variance,
            tree_select,
            z_normalize: parse_bool(self.get("z"), "z")?,
            l2_normalize: parse_bool(self.get("l2"), "l2")?,
        })
    }

    fn c_grid_for(&self, side_key: &str) -> Result<Vec<f64>> {
        let side = self.get(side_key);
        let raw = if side.is_empty() { self.get("c_grid") } else { side };
        let grid = parse_float_list(raw, side_key)?;
        if grid.is_empty() {
            bail!("{side_key} resolves to an empty grid");
        }
        if grid.iter().any(|&c| c <= 0.0) {
            bail!("{side_key} contains a non-positive C");
        }
        Ok(grid)
    }

    pub fn c_unweighted_grid(&self) -> Result<Vec<f64>> {
        self.c_grid_for("c_unweighted_grid")
    }

    pub fn c_weighted_grid(&self) -> Result<Vec<f64>> {
        self.c_grid_for("c_weighted_grid")
    }

    pub fn gamma_grid(&self) -> Result<Vec<GammaSpec>> {
        match self.get("gamma_grid") {
            "default" => Ok(default_gamma_grid()),
            "median" => Ok(vec![GammaSpec::MedianHeuristic]),
            list => {
                let mut out = Vec::new();
                for item in list.split(',') {
                    let item = item.trim();
                    if item.is_empty() {
                        continue;
                    }
                    if item == "median" {
                        out.push(GammaSpec::MedianHeuristic);
                    } else {
                        let v: f64 = parse_num(item, "gamma_grid")?;
                        if v <= 0.0 {
                            bail!("gamma_grid contains non-positive {v}");
                        }
                        out.push(GammaSpec::Value(v));
                    }
                }
                if out.is_empty() {
                    bail!("gamma_grid is empty");
                }
                Ok(out)
            }
        }
    }

    pub fn alpha_grid(&self) -> Result<Vec<f64>> {
        match self.get("alpha_grid") {
            "default" => Ok(default_alpha_grid()),
            list => {
                let grid = parse_float_list(list, "alpha_grid")?;
                if grid.is_empty() {
                    bail!("alpha_grid is empty");
                }
                if grid.iter().any(|a| !(0.0..=1.0).contains(a)) {
                    bail!("alpha_grid values outside [0, 1]");
                }
                Ok(grid)
            }
        }
    }

    /// The classifier for a single fixed grid point (first entries of each
    /// grid); used when a command needs one concrete model.
    pub fn classifier_spec(&self) -> Result<ClassifierSpec> {
        let gamma = *self
            .gamma_grid()?
            .first()
            .expect("gamma grid validated nonempty");
        match self.get("classifier") {
            "fused" => Ok(ClassifierSpec::FusedKelm {
                c_unweighted: self.c_unweighted_grid()?[0],
                c_weighted: self.c_weighted_grid()?[0],
                gamma,
                alpha_grid: self.alpha_grid()?,
            }),
            "kelm" => Ok(ClassifierSpec::Kelm {
                c: self.c_unweighted_grid()?[0],
                gamma,
                weighting: Weighting::Unweighted,
            }),
            "wkelm" => Ok(ClassifierSpec::Kelm {
                c: self.c_weighted_grid()?[0],
                gamma,
                weighting: Weighting::ClassWeighted,
            }),
            other => bail!("unknown classifier {other:?}"),
        }
    }

    pub fn classifier_kind(&self) -> &str {
        self.get("classifier")
    }

    /// True when any hyperparameter grid has more than one point, i.e. the
    /// command should run a search rather than a single fit.
    pub fn needs_search(&self) -> Result<bool> {
        Ok(match self.get("classifier") {
            "fused" => {
                self.c_unweighted_grid()?.len() > 1
                    || self.c_weighted_grid()?.len() > 1
                    || self.gamma_grid()?.len() > 1
            }
            _ => self.c_unweighted_grid()?.len() > 1 || self.gamma_grid()?.len() > 1,
        })
    }
}

fn parse_num<T: std::str::FromStr>(value: &str, key: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| anyhow::anyhow!("config key {key}: cannot parse {value:?}"))
}

fn parse_bool(value: &str, key: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => bail!("config key {key}: expected a boolean, got {other:?}"),
    }
}

fn parse_float_list(value: &str, key: &str) -> Result<Vec<f64>> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_num(s, key))
        .collect()
}

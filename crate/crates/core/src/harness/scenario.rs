//! Scenario presets and the flat `key = value` scenario file format.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::Serialize;

use crate::coord::{Algorithm, CoordParams};
use crate::error::{Error, Result};
use crate::graph::{build_topology, Network, TopologyKind};
use crate::objective::{a1_bounds, builtin_objective, ClampBounds, ObjectiveSpec, BOUND_EPSILON};

/// Topology seed of the RAND presets: a connected graph whose single
/// degree-1 node plays the role of the weakly coordinated node.
pub const RAND_TOPOLOGY_SEED: u64 = 8;

pub const PRESETS: [&str; 5] = ["STAR-C1", "COMP-C1", "RAND-C1", "RAND-C2", "LINE-EX"];

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TopologySpec {
    pub kind: TopologyKind,
    pub n: usize,
    pub m: Option<usize>,
    pub seed: u64,
}

impl TopologySpec {
    pub fn build(&self) -> Result<Network> {
        build_topology(self.kind, self.n, self.m, self.seed)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmChoice {
    One(Algorithm),
    All,
}

impl AlgorithmChoice {
    pub fn algorithms(&self) -> Vec<Algorithm> {
        match self {
            AlgorithmChoice::One(a) => vec![*a],
            AlgorithmChoice::All => Algorithm::ALL.to_vec(),
        }
    }
}

impl FromStr for AlgorithmChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("all") {
            Ok(AlgorithmChoice::All)
        } else {
            Ok(AlgorithmChoice::One(s.parse()?))
        }
    }
}

impl fmt::Display for AlgorithmChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AlgorithmChoice::One(a) => a.fmt(f),
            AlgorithmChoice::All => f.write_str("all"),
        }
    }
}

/// Partial override of the default clamp box.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct BoundsOverride {
    pub theta_min: Option<f64>,
    pub theta_max: Option<f64>,
    pub rate_epsilon: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Scenario {
    pub id: String,
    pub topology: TopologySpec,
    pub objective: String,
    pub beta: f64,
    pub algorithm: AlgorithmChoice,
    pub frames: u64,
    pub frame_duration: f64,
    pub alpha: f64,
    pub step_scale: f64,
    pub seeds: Vec<u64>,
    pub bounds: BoundsOverride,
}

impl Scenario {
    fn base(id: &str, kind: TopologyKind, n: usize, m: Option<usize>, seed: u64, objective: &str, beta: f64) -> Self {
        Scenario {
            id: id.to_string(),
            topology: TopologySpec { kind, n, m, seed },
            objective: objective.to_string(),
            beta,
            algorithm: AlgorithmChoice::All,
            frames: 100_000,
            frame_duration: 10.0,
            alpha: 0.5,
            step_scale: 3.0,
            seeds: vec![1, 2, 3, 4, 5],
            bounds: BoundsOverride::default(),
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        let s = match name.to_ascii_uppercase().as_str() {
            "STAR-C1" => Self::base("STAR-C1", TopologyKind::Star, 5, None, 0, "C1", 5.0),
            "COMP-C1" => Self::base("COMP-C1", TopologyKind::Complete, 4, None, 0, "C1", 5.0),
            "RAND-C1" | "RAND-C2" => {
                let obj = &name[name.len() - 2..].to_ascii_uppercase();
                let mut s = Self::base(
                    &name.to_ascii_uppercase(),
                    TopologyKind::Random,
                    15,
                    Some(21),
                    RAND_TOPOLOGY_SEED,
                    obj,
                    4.0,
                );
                s.algorithm = AlgorithmChoice::One(Algorithm::Ind);
                s.seeds = vec![1];
                s
            }
            "LINE-EX" => Self::base("LINE-EX", TopologyKind::Line, 3, None, 0, "line-example", 5.0),
            _ => {
                return Err(Error::usage(format!(
                    "unknown preset `{name}` (known: {})",
                    PRESETS.join(", ")
                )))
            }
        };
        Ok(s)
    }

    pub fn network(&self) -> Result<Network> {
        self.topology.build()
    }

    pub fn objective_spec(&self) -> Result<ObjectiveSpec> {
        builtin_objective(&self.objective)
    }

    /// Default clamp box at the scenario's β with any overrides applied.
    pub fn clamp_bounds(&self, net: &Network, spec: &ObjectiveSpec, beta: f64) -> Result<ClampBounds> {
        let d = a1_bounds(net, spec, beta, BOUND_EPSILON)?;
        ClampBounds::new(
            self.bounds.theta_min.unwrap_or(d.theta_min),
            self.bounds.theta_max.unwrap_or(d.theta_max),
            self.bounds.rate_epsilon.unwrap_or(d.rate_epsilon),
        )
    }

    pub fn params(&self, net: &Network, spec: &ObjectiveSpec, beta: f64) -> Result<CoordParams> {
        let p = CoordParams {
            beta,
            alpha: self.alpha,
            step_scale: self.step_scale,
            frame_duration: self.frame_duration,
            bounds: self.clamp_bounds(net, spec, beta)?,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames == 0 {
            return Err(Error::config("frames must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        let net = self.network()?;
        let spec = self.objective_spec()?;
        self.params(&net, &spec, self.beta)?;
        Ok(())
    }
}

/// A preset name, or a path to a scenario file.
pub fn load_scenario(source: &str) -> Result<Scenario> {
    let path = Path::new(source);
    if path.is_file() {
        let text = std::fs::read_to_string(path)?;
        let id = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| source.to_string());
        parse_scenario(&text, &id)
    } else if source.contains('/') || source.contains('.') {
        Err(Error::usage(format!("scenario file `{source}` not found")))
    } else {
        Scenario::preset(source)
    }
}

fn value<T: FromStr>(line: usize, key: &str, raw: &str) -> Result<T> {
    raw.parse().map_err(|_| Error::Parse {
        line,
        msg: format!("invalid value `{raw}` for `{key}`"),
    })
}

/// Parses a scenario file. Lines are `key = value`; `[section]` headers
/// prefix the keys that follow (`[run]` then `beta = 5` is `run.beta`);
/// `#` and `;` start comments.
pub fn parse_scenario(text: &str, id: &str) -> Result<Scenario> {
    let mut kind = None;
    let mut n = None;
    let mut m = None;
    let mut topo_seed = 0;
    let mut objective = None;
    let mut s = Scenario::base(id, TopologyKind::Line, 1, None, 0, "", 5.0);
    let mut section = String::new();

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let body = raw.split(['#', ';']).next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        if let Some(rest) = body.strip_prefix('[') {
            let name = rest.strip_suffix(']').ok_or_else(|| Error::Parse {
                line,
                msg: "unterminated section header".into(),
            })?;
            section = name.trim().to_string();
            continue;
        }
        let (k, v) = body.split_once('=').ok_or_else(|| Error::Parse {
            line,
            msg: format!("expected `key = value`, found `{body}`"),
        })?;
        let k = k.trim();
        let v = v.trim();
        let key = if section.is_empty() || k.contains('.') {
            k.to_string()
        } else {
            format!("{section}.{k}")
        };
        match key.as_str() {
            "id" => s.id = v.to_string(),
            "topology.kind" => kind = Some(value::<TopologyKind>(line, &key, v)?),
            "topology.n" => n = Some(value::<usize>(line, &key, v)?),
            "topology.m" => m = Some(value::<usize>(line, &key, v)?),
            "topology.seed" => topo_seed = value(line, &key, v)?,
            "objective.name" => {
                builtin_objective(v).map_err(|e| Error::Parse { line, msg: e.to_string() })?;
                objective = Some(v.to_string());
            }
            "run.algorithm" => s.algorithm = value(line, &key, v)?,
            "run.beta" => s.beta = value(line, &key, v)?,
            "run.frames" => s.frames = value(line, &key, v)?,
            "run.T" => s.frame_duration = value(line, &key, v)?,
            "run.alpha" => s.alpha = value(line, &key, v)?,
            "run.step_scale" => s.step_scale = value(line, &key, v)?,
            "run.seeds" => {
                s.seeds = v
                    .split(',')
                    .map(|x| value(line, &key, x.trim()))
                    .collect::<Result<_>>()?
            }
            "bounds.theta_min" => s.bounds.theta_min = Some(value(line, &key, v)?),
            "bounds.theta_max" => s.bounds.theta_max = Some(value(line, &key, v)?),
            "bounds.rate_epsilon" => s.bounds.rate_epsilon = Some(value(line, &key, v)?),
            _ => {
                return Err(Error::Parse {
                    line,
                    msg: format!("unknown key `{key}`"),
                })
            }
        }
    }

    let missing = |k: &str| Error::Parse {
        line: 0,
        msg: format!("missing required key `{k}`"),
    };
    s.topology = TopologySpec {
        kind: kind.ok_or_else(|| missing("topology.kind"))?,
        n: n.ok_or_else(|| missing("topology.n"))?,
        m,
        seed: topo_seed,
    };
    s.objective = objective.ok_or_else(|| missing("objective.name"))?;
    s.validate()?;
    Ok(s)
}

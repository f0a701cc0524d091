//! Flat `key = value` experiment files.
//!
//! Recognized keys (all optional except `kind`):
//!
//! | key | meaning | default |
//! |---|---|---|
//! | `kind` | experiment kind | required |
//! | `map` | `poly C0 C1 ..`, `unicritical D L` or `rational .. / ..` | `unicritical 2 0` |
//! | `n` | `A..B` (inclusive) or a single order | `1..4` |
//! | `targets` | `;`-separated points (`inf`, `x`, `x,y`), `id` or `l1` | `1` |
//! | `etas` | `,`-separated rates above 1 | `1.1,1.2,1.5` |
//! | `samples` | Monte Carlo samples per proximity estimate | `1000000` |
//! | `mu_samples` | samples per equilibrium-measure pairing | `1000000` |
//! | `method` | `inverse_iteration` or `potential` | `inverse_iteration` |
//! | `test_function` | `phi_inf`, `phi_0`, `phi_1`, `phi_i`, `odd`, `const`, `chordal:A` | `phi_inf` |
//! | `c_f` | Lipschitz constant squared; measured when absent | absent |
//! | `seed` | master seed | `0` |
//! | `out` | output directory | `out` |
//! | `budget` | atom budget per divisor | `16384` |
//! | `domain` | `corpus`, `disk C R`, `annulus C RIN ROUT` or `mask STEM` | `corpus` |
//! | `radii` | `,`-separated circle radii for a custom domain | empty |
//! | `s` | disk radius around the target | `0.3` |
//! | `probes` | probe points | `400` |
//! | `resolution` | grid cells per side | `512` |
//! | `center` | picks the component nearest this point | absent |
//! | `tolerance` | pass threshold on the discrepancy | `0.01` |

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use equidyn::potential::MuMethod;
use equidyn::ratmap::RationalMap;
use equidyn::sphere::{parse_point, SpherePoint};

use crate::error::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Proximity,
    Equidist,
    Periodic,
    Derivative,
    Parameter,
    Selberg,
    HypothesisH,
    Myrberg,
}

impl ExperimentKind {
    pub const ALL: [ExperimentKind; 8] = [
        ExperimentKind::Proximity,
        ExperimentKind::Equidist,
        ExperimentKind::Periodic,
        ExperimentKind::Derivative,
        ExperimentKind::Parameter,
        ExperimentKind::Selberg,
        ExperimentKind::HypothesisH,
        ExperimentKind::Myrberg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Proximity => "proximity",
            ExperimentKind::Equidist => "equidist",
            ExperimentKind::Periodic => "periodic",
            ExperimentKind::Derivative => "derivative",
            ExperimentKind::Parameter => "parameter",
            ExperimentKind::Selberg => "selberg",
            ExperimentKind::HypothesisH => "hypothesis-h",
            ExperimentKind::Myrberg => "myrberg",
        }
    }

    /// Whether tasks enumerate a divisor with `dⁿ` atoms.
    pub fn needs_divisor(self) -> bool {
        !matches!(self, ExperimentKind::Proximity | ExperimentKind::Selberg)
    }
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ExperimentKind {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        ExperimentKind::ALL
            .into_iter()
            .find(|k| k.name() == s.trim())
            .ok_or_else(|| CliError::Config(format!("unknown experiment kind {s:?}")))
    }
}

/// What a task is measured against.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Point(SpherePoint),
    /// `fⁿ` compared with the identity.
    Identity,
    /// The L¹ distance between the normalized log-derivative and the Green
    /// function.
    L1,
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Identity => f.write_str("id"),
            Target::L1 => f.write_str("l1"),
            Target::Point(p) => f.write_str(&format_point(*p)),
        }
    }
}

impl FromStr for Target {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        match s.trim() {
            "id" => Ok(Target::Identity),
            "l1" => Ok(Target::L1),
            t => Ok(Target::Point(parse_point(t)?)),
        }
    }
}

pub(crate) fn format_point(p: SpherePoint) -> String {
    match p {
        SpherePoint::Infinity => "inf".into(),
        SpherePoint::Finite { re, im } => format_complex(Complex64::new(re, im)),
    }
}

pub(crate) fn format_complex(c: Complex64) -> String {
    if c.im == 0.0 {
        format!("{:?}", c.re)
    } else {
        format!("{:?},{:?}", c.re, c.im)
    }
}

pub(crate) fn parse_complex(s: &str) -> Result<Complex64, CliError> {
    parse_point(s)?
        .to_complex()
        .ok_or_else(|| CliError::Config(format!("expected a finite point, got {s:?}")))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct NRange {
    pub start: usize,
    pub end: usize,
}

impl NRange {
    pub fn iter(&self) -> impl Iterator<Item = usize> {
        self.start..=self.end
    }

    pub fn len(&self) -> usize {
        self.end + 1 - self.start
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl fmt::Display for NRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

impl FromStr for NRange {
    type Err = CliError;

    fn from_str(s: &str) -> Result<Self, CliError> {
        let bad = || CliError::Config(format!("bad n range {s:?}"));
        let num = |t: &str| t.trim().parse::<usize>().map_err(|_| bad());
        let (start, end) = match s.split_once("..") {
            Some((a, b)) => (num(a)?, num(b.trim_start_matches('='))?),
            None => {
                let n = num(s)?;
                (n, n)
            }
        };
        if start == 0 || end < start {
            return Err(bad());
        }
        Ok(NRange { start, end })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub map: String,
    pub n_range: NRange,
    pub targets: Vec<Target>,
    pub etas: Vec<f64>,
    pub samples: u64,
    pub mu_samples: u64,
    pub method: MuMethod,
    pub test_function: String,
    pub c_f: Option<f64>,
    pub seed: u64,
    pub out: PathBuf,
    pub budget: usize,
    pub domain: String,
    pub radii: Vec<f64>,
    pub s: f64,
    pub probes: usize,
    pub resolution: usize,
    pub center: Option<Complex64>,
    pub tolerance: f64,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        ExperimentConfig {
            kind,
            map: "unicritical 2 0".into(),
            n_range: NRange { start: 1, end: 4 },
            targets: vec![Target::Point(SpherePoint::ONE)],
            etas: vec![1.1, 1.2, 1.5],
            samples: 1_000_000,
            mu_samples: 1_000_000,
            method: MuMethod::InverseIteration,
            test_function: "phi_inf".into(),
            c_f: None,
            seed: 0,
            out: PathBuf::from("out"),
            budget: equidyn::DEFAULT_BUDGET,
            domain: "corpus".into(),
            radii: Vec::new(),
            s: 0.3,
            probes: 400,
            resolution: 512,
            center: None,
            tolerance: 1e-2,
        }
    }

    pub fn rational_map(&self) -> Result<RationalMap, CliError> {
        Ok(RationalMap::parse(&self.map)?)
    }

    /// Parses the flat format; later keys override earlier ones.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut pairs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("line {}: expected key = value", lineno + 1)))?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let kind = pairs
            .iter()
            .rev()
            .find(|(k, _)| k == "kind")
            .ok_or_else(|| CliError::Config("missing key `kind`".into()))?
            .1
            .parse()?;
        let mut c = ExperimentConfig::new(kind);
        for (k, v) in pairs {
            c.set(&k, &v)?;
        }
        Ok(c)
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let bad = || CliError::Config(format!("bad value {value:?} for `{key}`"));
        let float = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
        let list = |t: &str| -> Result<Vec<f64>, CliError> {
            t.split(',').filter(|x| !x.trim().is_empty()).map(float).collect()
        };
        match key {
            "kind" => self.kind = value.parse()?,
            "map" => {
                RationalMap::parse(value)?;
                self.map = value.to_string();
            }
            "n" => self.n_range = value.parse()?,
            "targets" => {
                self.targets = value
                    .split(';')
                    .filter(|t| !t.trim().is_empty())
                    .map(str::parse)
                    .collect::<Result<_, _>>()?
            }
            "etas" => self.etas = list(value)?,
            "samples" => self.samples = value.parse().map_err(|_| bad())?,
            "mu_samples" => self.mu_samples = value.parse().map_err(|_| bad())?,
            "method" => {
                self.method = match value {
                    "inverse_iteration" => MuMethod::InverseIteration,
                    "potential" => MuMethod::Potential,
                    _ => return Err(bad()),
                }
            }
            "test_function" => self.test_function = value.to_string(),
            "c_f" => self.c_f = if value.is_empty() { None } else { Some(float(value)?) },
            "seed" => self.seed = value.parse().map_err(|_| bad())?,
            "out" => self.out = PathBuf::from(value),
            "budget" => self.budget = value.parse().map_err(|_| bad())?,
            "domain" => self.domain = value.to_string(),
            "radii" => self.radii = list(value)?,
            "s" => self.s = float(value)?,
            "probes" => self.probes = value.parse().map_err(|_| bad())?,
            "resolution" => self.resolution = value.parse().map_err(|_| bad())?,
            "center" => {
                self.center = if value.is_empty() {
                    None
                } else {
                    Some(parse_complex(value)?)
                }
            }
            "tolerance" => self.tolerance = float(value)?,
            _ => return Err(CliError::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }

    /// The flat text form; [`ExperimentConfig::parse`] inverts it exactly.
    pub fn emit(&self) -> String {
        let floats = |v: &[f64]| v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(",");
        let method = match self.method {
            MuMethod::InverseIteration => "inverse_iteration",
            MuMethod::Potential => "potential",
        };
        let targets = self.targets.iter().map(Target::to_string).collect::<Vec<_>>().join("; ");
        let lines = [
            ("kind", self.kind.to_string()),
            ("map", self.map.clone()),
            ("n", self.n_range.to_string()),
            ("targets", targets),
            ("etas", floats(&self.etas)),
            ("samples", self.samples.to_string()),
            ("mu_samples", self.mu_samples.to_string()),
            ("method", method.to_string()),
            ("test_function", self.test_function.clone()),
            ("c_f", self.c_f.map(|x| format!("{x:?}")).unwrap_or_default()),
            ("seed", self.seed.to_string()),
            ("out", self.out.display().to_string()),
            ("budget", self.budget.to_string()),
            ("domain", self.domain.clone()),
            ("radii", floats(&self.radii)),
            ("s", format!("{:?}", self.s)),
            ("probes", self.probes.to_string()),
            ("resolution", self.resolution.to_string()),
            ("center", self.center.map(format_complex).unwrap_or_default()),
            ("tolerance", format!("{:?}", self.tolerance)),
        ];
        lines.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    /// Checks everything that can be checked without computing, including
    /// `dⁿ ≤ budget` over the whole range.
    pub fn validate(&self) -> Result<(), CliError> {
        let f = self.rational_map()?;
        if self.etas.is_empty() || self.etas.iter().any(|&e| !(e > 1.0 && e.is_finite())) {
            return Err(CliError::Config(format!("every η must exceed 1, got {:?}", self.etas)));
        }
        if self.targets.is_empty() && !matches!(self.kind, ExperimentKind::Periodic | ExperimentKind::HypothesisH | ExperimentKind::Selberg) {
            return Err(CliError::Config("at least one target is required".into()));
        }
        if self.kind.needs_divisor() {
            let needed = (f.degree() as u128).checked_pow(self.n_range.end as u32).unwrap_or(u128::MAX);
            if needed > self.budget as u128 {
                return Err(equidyn::Error::BudgetExceeded {
                    needed,
                    budget: self.budget,
                }
                .into());
            }
        }
        let allowed = |t: &Target| match self.kind {
            ExperimentKind::Proximity => !matches!(t, Target::L1),
            ExperimentKind::Derivative => !matches!(t, Target::Identity),
            _ => matches!(t, Target::Point(_)),
        };
        if let Some(t) = self.targets.iter().find(|t| !allowed(t)) {
            return Err(CliError::Config(format!("target `{t}` does not apply to {}", self.kind)));
        }
        if matches!(self.kind, ExperimentKind::Myrberg | ExperimentKind::Parameter)
            && self.targets.iter().any(|t| matches!(t, Target::Point(SpherePoint::Infinity)))
        {
            return Err(CliError::Config(format!("{} needs finite targets", self.kind)));
        }
        if self.kind == ExperimentKind::Selberg && self.domain.trim() != "corpus" && self.radii.is_empty() {
            return Err(CliError::Config("a custom domain needs `radii`".into()));
        }
        Ok(())
    }
}

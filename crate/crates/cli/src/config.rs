//! Experiment configuration: JSON with inline or file-referenced descriptors.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use anosov_core::norms::NormParams;
use anosov_core::perturb::{PerturbationFamily, RandomKernel};
use anosov_core::{Error, Result, TorusMap, TrigField, TrigObservable};
use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// A descriptor given inline or as a path relative to the config file.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Ref<T> {
    File(PathBuf),
    Inline(T),
}

impl<T: DeserializeOwned + Clone> Ref<T> {
    fn resolve(&self, base: &Path) -> Result<T> {
        match self {
            Ref::Inline(v) => Ok(v.clone()),
            Ref::File(p) => {
                let path = base.join(p);
                let text = fs::read_to_string(&path)
                    .map_err(|e| Error::InvalidParams(format!("cannot read {}: {e}", path.display())))?;
                Ok(serde_json::from_str(&text)?)
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSpec {
    Cat,
    AreaPreserving { t: f64 },
    Dissipative { t: f64 },
    Custom { matrix: [[i64; 2]; 2], perturbation: TrigField, strength: f64 },
}

impl MapSpec {
    pub fn build(&self) -> Result<TorusMap> {
        Ok(match self {
            MapSpec::Cat => TorusMap::cat(),
            MapSpec::AreaPreserving { t } => TorusMap::cat_area_preserving(*t),
            MapSpec::Dissipative { t } => TorusMap::cat_dissipative(*t),
            MapSpec::Custom { matrix, perturbation, strength } => TorusMap::new(*matrix, perturbation.clone(), *strength)?,
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FamilySpec {
    Dissipative { t0: f64 },
    AreaPreserving { t0: f64 },
    /// Cat map plus `t (1,0) cos(2πx₁)/2π`; conjugate to its `-t` member by `x ↦ -x`.
    Symmetric,
    Custom { base: MapSpec, directions: Vec<TrigField>, order: usize },
}

impl FamilySpec {
    pub fn build(&self) -> Result<PerturbationFamily> {
        match self {
            FamilySpec::Dissipative { t0 } => Ok(PerturbationFamily::dissipative(*t0)),
            FamilySpec::AreaPreserving { t0 } => Ok(PerturbationFamily::area_preserving(*t0)),
            FamilySpec::Symmetric => {
                PerturbationFamily::new(TorusMap::cat(), vec![TrigField::shear([1.0, 0.0], [1, 0], false)], 3)
            }
            FamilySpec::Custom { base, directions, order } => PerturbationFamily::new(base.build()?, directions.clone(), *order),
        }
    }
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObsSpec {
    Cos { k: [i32; 2], #[serde(default = "one")] amp: f64 },
    Sin { k: [i32; 2], #[serde(default = "one")] amp: f64 },
    Constant { c: f64 },
    Sum { terms: Vec<ObsSpec> },
}

impl ObsSpec {
    pub fn build(&self) -> TrigObservable {
        match self {
            ObsSpec::Cos { k, amp } => TrigObservable::cos_mode(*k).scaled(Complex64::new(*amp, 0.0)),
            ObsSpec::Sin { k, amp } => {
                // sin θ = (e^{iθ} - e^{-iθ}) / 2i
                let mut h = TrigObservable::zeros(k[0].unsigned_abs().max(k[1].unsigned_abs()) as usize);
                h.set(*k, Complex64::new(0.0, -0.5 * amp));
                h.set([-k[0], -k[1]], Complex64::new(0.0, 0.5 * amp));
                h
            }
            ObsSpec::Constant { c } => TrigObservable::constant(*c),
            ObsSpec::Sum { terms } => {
                terms.iter().map(|t| t.build()).reduce(|a, b| a.add(&b)).unwrap_or_else(|| TrigObservable::constant(0.0))
            }
        }
    }
}

impl fmt::Display for ObsSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ObsSpec::Cos { k, amp } => write!(f, "{amp}cos({},{})", k[0], k[1]),
            ObsSpec::Sin { k, amp } => write!(f, "{amp}sin({},{})", k[0], k[1]),
            ObsSpec::Constant { c } => write!(f, "{c}"),
            ObsSpec::Sum { terms } => {
                let parts: Vec<String> = terms.iter().map(|t| t.to_string()).collect();
                write!(f, "{}", parts.join("+"))
            }
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    pub maps: Vec<MapSpec>,
    pub weights: Vec<f64>,
    /// Densities of all members but the last; the last is the residual.
    pub densities: Vec<ObsSpec>,
}

impl KernelSpec {
    pub fn build(&self) -> Result<RandomKernel> {
        let maps = self.maps.iter().map(|m| m.build()).collect::<Result<Vec<_>>>()?;
        RandomKernel::with_residual(maps, self.weights.clone(), self.densities.iter().map(|d| d.build()).collect())
    }
}

/// Overrides on top of the map-derived defaults.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NormSection {
    pub p: Option<usize>,
    pub q: Option<f64>,
    pub r: Option<usize>,
    pub delta: Option<f64>,
    pub n_leaves: Option<usize>,
    pub n_testfn: Option<usize>,
    pub n_vf: Option<usize>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilitySection {
    pub rho: f64,
    pub deltas: Vec<f64>,
    pub cutoff: usize,
}

impl Default for StabilitySection {
    fn default() -> Self {
        StabilitySection { rho: 0.8, deltas: vec![1e-1, 1e-2, 1e-3, 1e-4], cutoff: 8 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ResolventSection {
    pub alpha: f64,
    pub m: f64,
    pub chains: usize,
    pub depth: usize,
    pub big: f64,
    pub z: [f64; 2],
    pub rho: f64,
    pub delta: f64,
    pub t_max: f64,
    pub t_min: f64,
    pub points: usize,
    pub s_max: usize,
}

impl Default for ResolventSection {
    fn default() -> Self {
        ResolventSection {
            alpha: 0.25,
            m: 4.0,
            chains: 8,
            depth: 7,
            big: 1e5,
            z: [1.0, 0.0],
            rho: 1.0,
            delta: 0.5,
            t_max: 1e-1,
            t_min: 1e-3,
            points: 9,
            s_max: 2,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct VarianceSection {
    pub n_orbits: usize,
    pub orbit_len: usize,
    pub t_grid: Vec<f64>,
}

impl Default for VarianceSection {
    fn default() -> Self {
        VarianceSection { n_orbits: 10_000, orbit_len: 1000, t_grid: Vec::new() }
    }
}

fn default_cutoff() -> usize {
    12
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<Ref<MapSpec>>,
    /// Second map for `mapdist`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub other_map: Option<Ref<MapSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub family: Option<Ref<FamilySpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kernel: Option<Ref<KernelSpec>>,
    #[serde(default)]
    pub norm: NormSection,
    #[serde(default)]
    pub observables: Vec<ObsSpec>,
    #[serde(default = "default_cutoff")]
    pub cutoff: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default)]
    pub n_max: Option<usize>,
    #[serde(default)]
    pub grid: Option<usize>,
    #[serde(default)]
    pub k_top: Option<usize>,
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default)]
    pub m_target: Option<f64>,
    #[serde(default)]
    pub stability: StabilitySection,
    #[serde(default)]
    pub resolvent: ResolventSection,
    #[serde(default)]
    pub variance: VarianceSection,
    #[serde(default)]
    pub out: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("empty config is valid")
    }
}

/// A config with every file reference replaced by its contents.
#[derive(Clone, Debug, Serialize)]
pub struct Resolved {
    pub map: Option<MapSpec>,
    pub other_map: Option<MapSpec>,
    pub family: Option<FamilySpec>,
    pub kernel: Option<KernelSpec>,
    pub seed: u64,
    #[serde(flatten)]
    pub rest: ExperimentConfig,
}

impl Resolved {
    pub fn load(path: Option<&Path>, seed: Option<u64>) -> Result<Self> {
        let (cfg, base) = match path {
            Some(p) => {
                let text =
                    fs::read_to_string(p).map_err(|e| Error::InvalidParams(format!("cannot read {}: {e}", p.display())))?;
                let cfg: ExperimentConfig = serde_json::from_str(&text)?;
                (cfg, p.parent().map(Path::to_path_buf).unwrap_or_default())
            }
            None => (ExperimentConfig::default(), PathBuf::new()),
        };
        let r = Resolved {
            map: cfg.map.as_ref().map(|m| m.resolve(&base)).transpose()?,
            other_map: cfg.other_map.as_ref().map(|m| m.resolve(&base)).transpose()?,
            family: cfg.family.as_ref().map(|m| m.resolve(&base)).transpose()?,
            kernel: cfg.kernel.as_ref().map(|m| m.resolve(&base)).transpose()?,
            seed: seed.or(cfg.seed).unwrap_or(1),
            rest: ExperimentConfig { map: None, other_map: None, family: None, kernel: None, seed: None, ..cfg },
        };
        if r.map.is_some() || r.rest.norm.p.is_some() || r.rest.norm.q.is_some() || r.rest.norm.r.is_some() {
            r.norm_params()?;
        }
        Ok(r)
    }

    /// SHA-256 of the resolved config, seed included.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config serializes");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn map(&self) -> Result<TorusMap> {
        self.map.as_ref().ok_or_else(|| Error::InvalidParams("config needs a map".into()))?.build()
    }

    pub fn other_map(&self) -> Result<TorusMap> {
        self.other_map.as_ref().ok_or_else(|| Error::InvalidParams("config needs other_map".into()))?.build()
    }

    pub fn family(&self) -> Result<PerturbationFamily> {
        self.family.as_ref().ok_or_else(|| Error::InvalidParams("config needs a family".into()))?.build()
    }

    pub fn kernel(&self) -> Result<RandomKernel> {
        self.kernel.as_ref().ok_or_else(|| Error::InvalidParams("config needs a kernel".into()))?.build()
    }

    /// Observables, or `cos 2π(x+y)` when none are listed.
    pub fn observables(&self) -> Vec<ObsSpec> {
        if self.rest.observables.is_empty() {
            vec![ObsSpec::Cos { k: [1, 1], amp: 1.0 }]
        } else {
            self.rest.observables.clone()
        }
    }

    /// Norm parameters for the configured map (or the cat map), validated.
    pub fn norm_params(&self) -> Result<NormParams> {
        let t = match &self.map {
            Some(m) => m.build()?,
            None => TorusMap::cat(),
        };
        let d = NormParams::for_map(&t)?;
        let n = &self.rest.norm;
        let p = NormParams {
            p: n.p.unwrap_or(d.p),
            q: n.q.unwrap_or(d.q),
            r: n.r.unwrap_or(d.r),
            delta: n.delta.unwrap_or(d.delta),
            n_leaves: n.n_leaves.unwrap_or(d.n_leaves),
            n_testfn: n.n_testfn.unwrap_or(d.n_testfn),
            n_vf: n.n_vf.unwrap_or(d.n_vf),
            seed: self.seed,
            ..d
        };
        p.validate()?;
        Ok(p)
    }
}

//! Experiment configuration: a JSON object with a versioned `schema` field, a
//! shared header and kind-specific fields.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use hyperfrac::inverse::RecoveryConfig;
use hyperfrac::operator::PolyharmonicSpec;
use hyperfrac::solver::{build_mesh, MeshConfig, MeshKind, Window};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::error::CliError;

pub const CONFIG_SCHEMA: &str = "hyperfrac-config/1";

/// Header fields accepted by every kind.
const COMMON_FIELDS: [&str; 4] = ["schema", "kind", "seed", "out"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Kind {
    TransformCheck,
    OperatorEquivalence,
    HeatkernelBounds,
    Solve,
    Dn,
    IntegralIdentity,
    Entangle,
    Runge,
    Recover,
}

impl Kind {
    pub const ALL: [Kind; 9] = [
        Kind::TransformCheck,
        Kind::OperatorEquivalence,
        Kind::HeatkernelBounds,
        Kind::Solve,
        Kind::Dn,
        Kind::IntegralIdentity,
        Kind::Entangle,
        Kind::Runge,
        Kind::Recover,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Kind::TransformCheck => "transform-check",
            Kind::OperatorEquivalence => "operator-equivalence",
            Kind::HeatkernelBounds => "heatkernel-bounds",
            Kind::Solve => "solve",
            Kind::Dn => "dn",
            Kind::IntegralIdentity => "integral-identity",
            Kind::Entangle => "entangle",
            Kind::Runge => "runge",
            Kind::Recover => "recover",
        }
    }

    /// Fields without a default.
    fn required(self) -> &'static [&'static str] {
        match self {
            Kind::Solve | Kind::Dn | Kind::IntegralIdentity | Kind::Runge | Kind::Recover => &["spec"],
            Kind::Entangle => &["alphas"],
            _ => &[],
        }
    }

    /// All kind-specific fields, read off the payload struct.
    fn fields(self) -> &'static [&'static str] {
        match self {
            Kind::TransformCheck => struct_fields::<TransformCheck>(),
            Kind::OperatorEquivalence => struct_fields::<OperatorEquivalence>(),
            Kind::HeatkernelBounds => struct_fields::<HeatkernelBounds>(),
            Kind::Solve => struct_fields::<Solve>(),
            Kind::Dn => struct_fields::<Dn>(),
            Kind::IntegralIdentity => struct_fields::<IntegralIdentity>(),
            Kind::Entangle => struct_fields::<Entangle>(),
            Kind::Runge => struct_fields::<Runge>(),
            Kind::Recover => struct_fields::<Recover>(),
        }
    }
}

impl fmt::Display for Kind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Kind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Kind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown kind {s:?}"))
    }
}

/// Field names of a struct, captured from its `Deserialize` impl.
fn struct_fields<T: DeserializeOwned>() -> &'static [&'static str] {
    struct Probe(Option<&'static [&'static str]>);

    #[derive(Debug)]
    struct Stop;
    impl fmt::Display for Stop {
        fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str("field probe")
        }
    }
    impl std::error::Error for Stop {}
    impl serde::de::Error for Stop {
        fn custom<M: fmt::Display>(_: M) -> Self {
            Stop
        }
    }

    impl<'de> serde::Deserializer<'de> for &mut Probe {
        type Error = Stop;

        fn deserialize_any<V: serde::de::Visitor<'de>>(self, _: V) -> Result<V::Value, Stop> {
            Err(Stop)
        }

        fn deserialize_struct<V: serde::de::Visitor<'de>>(
            self,
            _: &'static str,
            fields: &'static [&'static str],
            _: V,
        ) -> Result<V::Value, Stop> {
            self.0 = Some(fields);
            Err(Stop)
        }

        serde::forward_to_deserialize_any! {
            bool i8 i16 i32 i64 i128 u8 u16 u32 u64 u128 f32 f64 char str string
            bytes byte_buf option unit unit_struct newtype_struct seq tuple
            tuple_struct map enum identifier ignored_any
        }
    }

    let mut probe = Probe(None);
    let _ = T::deserialize(&mut probe);
    probe.0.unwrap_or(&[])
}

/// Outcome of `validate`: empty when the file is a valid configuration.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub kind: Option<String>,
    pub missing: Vec<String>,
    pub extra: Vec<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub allowed_kinds: Vec<String>,
    pub errors: Vec<String>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.missing.is_empty() && self.extra.is_empty() && self.allowed_kinds.is_empty() && self.errors.is_empty()
    }

    fn summary(&self) -> String {
        let mut parts = Vec::new();
        if !self.missing.is_empty() {
            parts.push(format!("missing fields: {}", self.missing.join(", ")));
        }
        if !self.extra.is_empty() {
            parts.push(format!("unknown fields: {}", self.extra.join(", ")));
        }
        if !self.allowed_kinds.is_empty() {
            parts.push(format!("allowed kinds: {}", self.allowed_kinds.join(", ")));
        }
        parts.extend(self.errors.iter().cloned());
        parts.join("; ")
    }
}

/// Parsed configuration of one run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub schema: String,
    pub kind: Kind,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub experiment: Experiment,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Experiment {
    TransformCheck(TransformCheck),
    OperatorEquivalence(OperatorEquivalence),
    HeatkernelBounds(HeatkernelBounds),
    Solve(Solve),
    Dn(Dn),
    IntegralIdentity(IntegralIdentity),
    Entangle(Entangle),
    Runge(Runge),
    Recover(Recover),
}

/// Structural checks only: schema tag, kind, missing and unknown fields, field types.
pub fn validate_value(value: &Value, kind_hint: Option<Kind>) -> ValidationReport {
    let mut report = ValidationReport::default();
    let Some(obj) = value.as_object() else {
        report.errors.push("configuration must be a JSON object".into());
        return report;
    };
    match obj.get("schema") {
        None => report.missing.push("schema".into()),
        Some(Value::String(s)) if s == CONFIG_SCHEMA => {}
        Some(other) => report
            .errors
            .push(format!("unsupported schema {other}; expected {CONFIG_SCHEMA:?}")),
    }
    let kind = match (obj.get("kind"), kind_hint) {
        (Some(Value::String(s)), hint) => match s.parse::<Kind>() {
            Ok(k) => {
                if let Some(h) = hint.filter(|h| *h != k) {
                    report
                        .errors
                        .push(format!("config is for kind {k} but the command asked for {h}"));
                }
                Some(k)
            }
            Err(e) => {
                report.errors.push(e);
                report.allowed_kinds = Kind::ALL.iter().map(|k| k.as_str().to_string()).collect();
                report.kind = Some(s.clone());
                return report;
            }
        },
        (Some(other), _) => {
            report.errors.push(format!("kind must be a string, got {other}"));
            return report;
        }
        (None, Some(h)) => Some(h),
        (None, None) => {
            report.missing.push("kind".into());
            report.allowed_kinds = Kind::ALL.iter().map(|k| k.as_str().to_string()).collect();
            return report;
        }
    };
    let kind = kind.expect("kind resolved above");
    report.kind = Some(kind.as_str().to_string());

    let known: BTreeSet<&str> = COMMON_FIELDS.iter().chain(kind.fields()).copied().collect();
    report.extra = obj.keys().filter(|k| !known.contains(k.as_str())).cloned().collect();
    report.missing.extend(
        kind.required()
            .iter()
            .filter(|f| !obj.contains_key(**f))
            .map(|f| f.to_string()),
    );
    if let Some(seed) = obj.get("seed") {
        if seed.as_u64().is_none() {
            report.errors.push(format!("seed must be an unsigned integer, got {seed}"));
        }
    }
    if let Some(out) = obj.get("out") {
        if !out.is_string() {
            report.errors.push(format!("out must be a path string, got {out}"));
        }
    }
    if report.missing.is_empty() && report.extra.is_empty() {
        if let Err(e) = parse_experiment(kind, payload(obj)) {
            report.errors.push(e);
        }
    }
    report
}

fn payload(obj: &Map<String, Value>) -> Value {
    Value::Object(
        obj.iter()
            .filter(|(k, _)| !COMMON_FIELDS.contains(&k.as_str()))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect(),
    )
}

fn typed<T: DeserializeOwned>(v: Value) -> Result<T, String> {
    serde_json::from_value(v).map_err(|e| e.to_string())
}

fn parse_experiment(kind: Kind, v: Value) -> Result<Experiment, String> {
    Ok(match kind {
        Kind::TransformCheck => Experiment::TransformCheck(typed(v)?),
        Kind::OperatorEquivalence => Experiment::OperatorEquivalence(typed(v)?),
        Kind::HeatkernelBounds => Experiment::HeatkernelBounds(typed(v)?),
        Kind::Solve => Experiment::Solve(typed(v)?),
        Kind::Dn => Experiment::Dn(typed(v)?),
        Kind::IntegralIdentity => Experiment::IntegralIdentity(typed(v)?),
        Kind::Entangle => Experiment::Entangle(typed(v)?),
        Kind::Runge => Experiment::Runge(typed(v)?),
        Kind::Recover => Experiment::Recover(typed(v)?),
    })
}

/// Full parse: structure, types, then value ranges.
pub fn parse_config(text: &str, kind: Kind) -> Result<ExperimentConfig, CliError> {
    let value: Value = serde_json::from_str(text).map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
    let report = validate_value(&value, Some(kind));
    if !report.is_empty() {
        return Err(CliError::Config(report.summary()));
    }
    let obj = value.as_object().expect("validated object");
    let experiment = parse_experiment(kind, payload(obj)).map_err(CliError::Config)?;
    let cfg = ExperimentConfig {
        schema: CONFIG_SCHEMA.to_string(),
        kind,
        seed: obj.get("seed").and_then(Value::as_u64).unwrap_or(0),
        out: obj.get("out").and_then(Value::as_str).map(PathBuf::from),
        experiment,
    };
    cfg.experiment.check().map_err(CliError::Config)?;
    Ok(cfg)
}

// ---------------------------------------------------------------------------
// Shared building blocks

fn ensure(ok: bool, msg: impl Into<String>) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn check_dim(n: usize) -> Result<(), String> {
    ensure(n == 2 || n == 3, format!("dimension n must be 2 or 3, got {n}"))
}

/// Operator terms as (b, s) pairs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpecField(pub Vec<(f64, f64)>);

impl SpecField {
    pub fn build(&self) -> Result<PolyharmonicSpec, String> {
        let spec = PolyharmonicSpec::new(&self.0).map_err(|e| e.to_string())?;
        spec.require_positive().map_err(|e| e.to_string())?;
        Ok(spec)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MeshPreset {
    Radial,
    Recovery,
    Disk,
}

/// A preset layout with optional overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeshSection {
    pub preset: MeshPreset,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w1: Option<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w2: Option<[f64; 2]>,
}

impl MeshSection {
    pub fn preset(preset: MeshPreset) -> Self {
        Self {
            preset,
            radius: None,
            h: None,
            omega_radius: None,
            w1: None,
            w2: None,
        }
    }

    pub fn resolve(&self) -> MeshConfig {
        let base = match self.preset {
            MeshPreset::Radial => MeshConfig::radial_default(),
            MeshPreset::Recovery => MeshConfig::recovery_default(),
            MeshPreset::Disk => MeshConfig::disk_default(),
        };
        MeshConfig {
            radius: self.radius.unwrap_or(base.radius),
            h: self.h.unwrap_or(base.h),
            omega_radius: self.omega_radius.unwrap_or(base.omega_radius),
            w1: self.w1.unwrap_or(base.w1),
            w2: self.w2.unwrap_or(base.w2),
            ..base
        }
    }

    fn check(&self) -> Result<(), String> {
        build_mesh(&self.resolve()).map(|_| ()).map_err(|e| format!("mesh: {e}"))
    }

    fn is_fem(&self) -> bool {
        self.resolve().kind == MeshKind::Disk
    }
}

/// Cellwise potential c·1_{B_radius}; `value = 0` is q ≡ 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BallPotential {
    pub radius: f64,
    pub value: f64,
}

impl BallPotential {
    pub const ZERO: Self = Self { radius: 1.0, value: 0.0 };

    fn check(&self, name: &str) -> Result<(), String> {
        ensure(
            self.radius > 0.0 && self.radius.is_finite() && self.value.is_finite(),
            format!("{name}: radius must be positive and value finite"),
        )
    }
}

fn check_fem_orders(mesh: &MeshSection, spec: &SpecField) -> Result<(), String> {
    if mesh.is_fem() {
        if let Some((_, s)) = spec.0.iter().find(|(_, s)| *s >= 1.0) {
            return Err(format!(
                "the finite-element path supports orders in (0,1) only, got s = {s}"
            ));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Kind payloads

macro_rules! tolerances {
    ($name:ident { $($field:ident : $default:expr),* $(,)? }) => {
        #[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
        #[serde(deny_unknown_fields, default)]
        pub struct $name {
            $(pub $field: f64,)*
        }

        impl Default for $name {
            fn default() -> Self {
                Self { $($field: $default,)* }
            }
        }

        impl $name {
            fn check(&self) -> Result<(), String> {
                $(ensure(self.$field > 0.0 && self.$field.is_finite(),
                    concat!("tolerance ", stringify!($field), " must be positive"))?;)*
                Ok(())
            }
        }
    };
}

tolerances!(TransformTolerances { plancherel: 1e-6 });

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TransformCheck {
    pub n: usize,
    pub bump_radii: Vec<f64>,
    pub tolerances: TransformTolerances,
}

impl Default for TransformCheck {
    fn default() -> Self {
        Self {
            n: 3,
            bump_radii: vec![2.0, 2.5, 3.0, 3.5, 4.0],
            tolerances: TransformTolerances::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Backend {
    Spectral,
    Fem,
}

tolerances!(EquivalenceTolerances {
    semigroup: 1e-5,
    singular_integral: 1e-3,
    two_route: 1e-6,
});

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OperatorEquivalence {
    pub n: Option<usize>,
    pub s: Vec<f64>,
    pub backend: Backend,
    pub bump_radius: f64,
    pub mesh: Option<MeshSection>,
    pub modes: usize,
    pub tolerances: EquivalenceTolerances,
}

impl Default for OperatorEquivalence {
    fn default() -> Self {
        Self {
            n: None,
            s: vec![0.25, 0.5, 0.75],
            backend: Backend::Spectral,
            bump_radius: 2.0,
            mesh: None,
            modes: 3,
            tolerances: EquivalenceTolerances::default(),
        }
    }
}

impl OperatorEquivalence {
    pub fn dim(&self) -> usize {
        self.n.unwrap_or(match self.backend {
            Backend::Spectral => 3,
            Backend::Fem => 2,
        })
    }

    pub fn mesh(&self) -> MeshSection {
        self.mesh.clone().unwrap_or(MeshSection::preset(MeshPreset::Disk))
    }
}

tolerances!(HeatTolerances { grid_stability: 0.05 });

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HeatkernelBounds {
    pub n: usize,
    pub rho_max: f64,
    pub t_min: f64,
    pub t_max: f64,
    pub points: usize,
    pub tolerances: HeatTolerances,
}

impl Default for HeatkernelBounds {
    fn default() -> Self {
        Self {
            n: 3,
            rho_max: 20.0,
            t_min: 1e-3,
            t_max: 50.0,
            points: 101,
            tolerances: HeatTolerances::default(),
        }
    }
}

/// Exterior data: one window mode (1-based) times an amplitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataSpec {
    pub window: Window,
    pub mode: usize,
    pub amplitude: f64,
}

impl Default for DataSpec {
    fn default() -> Self {
        Self {
            window: Window::W1,
            mode: 1,
            amplitude: 1.0,
        }
    }
}

tolerances!(SolveTolerances { residual: 1e-10 });

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Solve {
    pub spec: SpecField,
    #[serde(default = "radial_mesh")]
    pub mesh: MeshSection,
    #[serde(default = "zero_potential")]
    pub q: BallPotential,
    #[serde(default)]
    pub data: DataSpec,
    #[serde(default)]
    pub tolerances: SolveTolerances,
}

fn radial_mesh() -> MeshSection {
    MeshSection::preset(MeshPreset::Radial)
}

fn recovery_mesh() -> MeshSection {
    MeshSection::preset(MeshPreset::Recovery)
}

fn zero_potential() -> BallPotential {
    BallPotential::ZERO
}

tolerances!(DnTolerances {
    two_route: 1e-6,
    symmetry: 1e-8,
});

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dn {
    pub spec: SpecField,
    #[serde(default = "radial_mesh")]
    pub mesh: MeshSection,
    #[serde(default = "zero_potential")]
    pub q: BallPotential,
    #[serde(default = "default_modes")]
    pub n_data: usize,
    #[serde(default = "default_modes")]
    pub n_tests: usize,
    #[serde(default)]
    pub tolerances: DnTolerances,
}

fn default_modes() -> usize {
    8
}

/// One integral-identity case: q₁ = c₁·1_{B_a}, q₂ = c₂·1_{B_b}, data mode f, test mode g.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdentityCase {
    pub q1: BallPotential,
    pub q2: BallPotential,
    pub f_mode: usize,
    pub g_mode: usize,
}

fn default_identity_cases() -> Vec<IdentityCase> {
    let ball = |radius, value| BallPotential { radius, value };
    [
        (0.5, 1.0, 0.0),
        (0.5, 0.5, -0.5),
        (1.0, 2.0, 0.5),
        (0.25, 3.0, 1.0),
        (0.75, -0.3, 0.2),
        (0.9, -0.5, 0.8),
        (0.3, 4.0, -1.0),
        (1.0, 0.6, 0.1),
        (0.6, 1.5, 0.0),
        (0.4, -0.2, 0.3),
    ]
    .iter()
    .enumerate()
    .map(|(k, &(a, c1, c2))| IdentityCase {
        q1: ball(a, c1),
        q2: ball(1.0, c2),
        f_mode: k % 5 + 1,
        g_mode: (k + 2) % 5 + 1,
    })
    .collect()
}

tolerances!(IdentityTolerances { gap: 1e-6 });

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegralIdentity {
    pub spec: SpecField,
    #[serde(default = "recovery_mesh")]
    pub mesh: MeshSection,
    #[serde(default = "default_identity_cases")]
    pub cases: Vec<IdentityCase>,
    #[serde(default)]
    pub tolerances: IdentityTolerances,
}

/// Log-uniform time grid for the moment computations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeGridSpec {
    pub t_min: f64,
    pub t_max: f64,
    pub panel_width: f64,
}

impl Default for TimeGridSpec {
    fn default() -> Self {
        Self {
            t_min: 1e-4,
            t_max: 1e3,
            panel_width: 0.25,
        }
    }
}

tolerances!(EntangleTolerances { null: 1e-10 });

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Entangle {
    pub alphas: Vec<f64>,
    /// Moment indices [ℓ, M].
    #[serde(default = "default_window")]
    pub window: [i32; 2],
    #[serde(default = "default_profiles")]
    pub profiles: usize,
    #[serde(default = "default_profile_ratio")]
    pub profile_ratio: f64,
    #[serde(default)]
    pub grid: TimeGridSpec,
    #[serde(default)]
    pub tolerances: EntangleTolerances,
}

fn default_window() -> [i32; 2] {
    [1, 12]
}

fn default_profiles() -> usize {
    4
}

fn default_profile_ratio() -> f64 {
    2.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RungeTargetKind {
    /// φ ≡ 1 on Ω.
    Constant,
    /// Cellwise values drawn uniformly from [−1, 1] with the run seed.
    Random,
    /// The solution with data on W₂ (mode 1).
    Solution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Runge {
    pub spec: SpecField,
    #[serde(default = "recovery_mesh")]
    pub mesh: MeshSection,
    #[serde(default = "unit_ball")]
    pub q: BallPotential,
    #[serde(default = "default_controls")]
    pub controls: Vec<usize>,
    #[serde(default = "default_runge_beta")]
    pub beta: f64,
    #[serde(default = "default_runge_targets")]
    pub targets: Vec<RungeTargetKind>,
}

fn unit_ball() -> BallPotential {
    BallPotential { radius: 0.5, value: 1.0 }
}

fn default_controls() -> Vec<usize> {
    vec![8, 16, 32]
}

fn default_runge_beta() -> f64 {
    1e-12
}

fn default_runge_targets() -> Vec<RungeTargetKind> {
    vec![RungeTargetKind::Constant, RungeTargetKind::Solution, RungeTargetKind::Random]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Born,
    GaussNewton,
}

tolerances!(RecoverTolerances {
    relative_error: 0.3,
    separation_ratio: 10.0,
});

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Recover {
    pub spec: SpecField,
    #[serde(default = "recovery_mesh")]
    pub mesh: MeshSection,
    #[serde(default = "default_truth")]
    pub q_true: BallPotential,
    /// A second potential whose DN map must be distinguishable from that of `q_true`.
    #[serde(default = "default_alternative")]
    pub q_alt: BallPotential,
    #[serde(default = "default_recovery_modes")]
    pub modes: usize,
    #[serde(default = "default_method")]
    pub method: Method,
    /// Uniform relative noise added to each data entry, scaled by the RMS entry.
    #[serde(default)]
    pub noise: f64,
    #[serde(default)]
    pub recovery: RecoveryConfig,
    #[serde(default)]
    pub tolerances: RecoverTolerances,
}

fn default_truth() -> BallPotential {
    BallPotential { radius: 0.5, value: 0.5 }
}

fn default_alternative() -> BallPotential {
    BallPotential { radius: 0.25, value: 0.5 }
}

fn default_recovery_modes() -> usize {
    32
}

fn default_method() -> Method {
    Method::Born
}

impl Experiment {
    /// Value-range checks that need no numerics beyond building the mesh.
    fn check(&self) -> Result<(), String> {
        match self {
            Experiment::TransformCheck(c) => {
                check_dim(c.n)?;
                ensure(!c.bump_radii.is_empty(), "bump_radii must not be empty")?;
                ensure(
                    c.bump_radii.iter().all(|a| *a > 0.0 && *a < 10.0),
                    "bump radii must lie in (0, 10)",
                )?;
                c.tolerances.check()
            }
            Experiment::OperatorEquivalence(c) => {
                check_dim(c.dim())?;
                ensure(!c.s.is_empty(), "s must list at least one order")?;
                ensure(c.bump_radius > 0.0 && c.bump_radius < 10.0, "bump_radius must lie in (0, 10)")?;
                c.tolerances.check()?;
                match c.backend {
                    Backend::Spectral => {
                        ensure(c.mesh.is_none(), "mesh applies to the fem backend only")?;
                        ensure(
                            c.s.iter().all(|s| *s > 0.0 && s.fract() != 0.0),
                            "orders must be positive and non-integer",
                        )
                    }
                    Backend::Fem => {
                        ensure(c.dim() == 2, "the fem backend lives on H^2 (n = 2)")?;
                        if let Some(s) = c.s.iter().find(|s| !(**s > 0.0 && **s < 1.0)) {
                            return Err(format!("the finite-element path supports orders in (0,1) only, got s = {s}"));
                        }
                        ensure(c.modes > 0, "modes must be positive")?;
                        let mesh = c.mesh();
                        ensure(mesh.is_fem(), "the fem backend needs a disk mesh")?;
                        mesh.check()
                    }
                }
            }
            Experiment::HeatkernelBounds(c) => {
                check_dim(c.n)?;
                ensure(c.rho_max > 0.0, "rho_max must be positive")?;
                ensure(c.t_min > 0.0 && c.t_max > c.t_min, "need 0 < t_min < t_max")?;
                ensure(c.points >= 3, "points must be at least 3")?;
                c.tolerances.check()
            }
            Experiment::Solve(c) => {
                c.spec.build()?;
                c.mesh.check()?;
                check_fem_orders(&c.mesh, &c.spec)?;
                c.q.check("q")?;
                ensure(c.data.mode >= 1, "data.mode is 1-based")?;
                c.tolerances.check()
            }
            Experiment::Dn(c) => {
                c.spec.build()?;
                c.mesh.check()?;
                check_fem_orders(&c.mesh, &c.spec)?;
                c.q.check("q")?;
                ensure(c.n_data > 0 && c.n_tests > 0, "n_data and n_tests must be positive")?;
                c.tolerances.check()
            }
            Experiment::IntegralIdentity(c) => {
                c.spec.build()?;
                c.mesh.check()?;
                check_fem_orders(&c.mesh, &c.spec)?;
                ensure(!c.cases.is_empty(), "cases must not be empty")?;
                for (k, case) in c.cases.iter().enumerate() {
                    case.q1.check(&format!("cases[{k}].q1"))?;
                    case.q2.check(&format!("cases[{k}].q2"))?;
                    ensure(case.f_mode >= 1 && case.g_mode >= 1, "modes are 1-based")?;
                }
                c.tolerances.check()
            }
            Experiment::Entangle(c) => {
                ensure(!c.alphas.is_empty(), "alphas must not be empty")?;
                ensure(
                    c.alphas.iter().all(|a| *a > 0.0 && *a < 1.0),
                    "alphas must lie in (0, 1)",
                )?;
                ensure(c.window[1] > c.window[0], "window must be [l, M] with M > l")?;
                ensure(c.profiles > 0, "profiles must be positive")?;
                ensure(c.profile_ratio > 1.0, "profile_ratio must exceed 1")?;
                ensure(
                    c.grid.t_min > 0.0 && c.grid.t_max > c.grid.t_min && c.grid.panel_width > 0.0,
                    "grid needs 0 < t_min < t_max and a positive panel width",
                )?;
                c.tolerances.check()
            }
            Experiment::Runge(c) => {
                c.spec.build()?;
                c.mesh.check()?;
                check_fem_orders(&c.mesh, &c.spec)?;
                c.q.check("q")?;
                ensure(!c.controls.is_empty(), "controls must not be empty")?;
                ensure(c.controls.iter().all(|k| *k > 0), "control counts must be positive")?;
                ensure(
                    c.controls.windows(2).all(|w| w[1] > w[0]),
                    "control counts must be strictly increasing",
                )?;
                ensure(c.beta >= 0.0 && c.beta.is_finite(), "beta must be >= 0")?;
                ensure(!c.targets.is_empty(), "targets must not be empty")
            }
            Experiment::Recover(c) => {
                c.spec.build()?;
                c.mesh.check()?;
                ensure(!c.mesh.is_fem(), "recovery needs the radial backend (two nested meshes)")?;
                c.q_true.check("q_true")?;
                c.q_alt.check("q_alt")?;
                ensure(c.q_true != c.q_alt, "q_alt must differ from q_true")?;
                ensure(c.modes > 0, "modes must be positive")?;
                ensure(c.noise >= 0.0 && c.noise.is_finite(), "noise must be >= 0")?;
                c.recovery.validate().map_err(|e| e.to_string())?;
                c.tolerances.check()
            }
        }
    }
}

//! JSON scene configuration: camera, lights, analytic primitives, LGI settings.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{CameraIntrinsics, LightAngles, LightKind, LightSpec, Point3};
use crate::lgi::LgiConfig;
use crate::synth::{AnalyticScene, OracleConfig, Primitive, SuiteEntry};

pub const SCHEMA_VERSION: &str = "1";

/// Intrinsics; omitted focal lengths and principal point take the default
/// `fx = W, fy = H, cx = W/2, cy = H/2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntrinsicsConfig {
    pub width: usize,
    pub height: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cx: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cy: Option<f64>,
}

impl IntrinsicsConfig {
    pub fn resolve(&self) -> Result<CameraIntrinsics> {
        let d = CameraIntrinsics::default_for(self.width, self.height);
        let k = CameraIntrinsics {
            fx: self.fx.unwrap_or(d.fx),
            fy: self.fy.unwrap_or(d.fy),
            cx: self.cx.unwrap_or(d.cx),
            cy: self.cy.unwrap_or(d.cy),
            ..d
        };
        k.validate()?;
        Ok(k)
    }

    pub fn explicit(k: &CameraIntrinsics) -> Self {
        IntrinsicsConfig {
            width: k.width,
            height: k.height,
            fx: Some(k.fx),
            fy: Some(k.fy),
            cx: Some(k.cx),
            cy: Some(k.cy),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LightKindName {
    Point,
    Directional,
}

fn default_color() -> [f64; 3] {
    [1.0, 1.0, 1.0]
}

fn default_intensity() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LightConfig {
    pub kind: LightKindName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<Point3>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Point3>,
    #[serde(default = "default_color")]
    pub color: [f64; 3],
    #[serde(default)]
    pub radius: f64,
    #[serde(default = "default_intensity")]
    pub intensity: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub azimuth: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub elevation: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<f64>,
}

fn config_err(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Config {
        path: path.into(),
        message: message.into(),
    }
}

impl LightConfig {
    /// `at` is the JSON path of this light, used in error messages.
    pub fn resolve(&self, at: &str) -> Result<LightSpec> {
        let mut spec = match self.kind {
            LightKindName::Point => {
                if self.direction.is_some() {
                    return Err(config_err(format!("{at}.direction"), "not allowed for a point light"));
                }
                let p = self
                    .position
                    .ok_or_else(|| config_err(format!("{at}.position"), "missing field `position`"))?;
                LightSpec::point(p)
            }
            LightKindName::Directional => {
                if self.position.is_some() {
                    return Err(config_err(format!("{at}.position"), "not allowed for a directional light"));
                }
                let d = self
                    .direction
                    .ok_or_else(|| config_err(format!("{at}.direction"), "missing field `direction`"))?;
                LightSpec::directional(d).map_err(|e| config_err(format!("{at}.direction"), e.to_string()))?
            }
        };
        spec = spec
            .with_color(self.color)
            .with_radius(self.radius)
            .with_intensity(self.intensity);
        spec.angles = match (self.azimuth, self.elevation, self.distance) {
            (Some(azimuth), Some(elevation), Some(distance)) => Some(LightAngles {
                azimuth,
                elevation,
                distance,
            }),
            (None, None, None) => None,
            _ => {
                return Err(config_err(
                    at,
                    "azimuth, elevation and distance must be given together",
                ))
            }
        };
        spec.validate().map_err(|e| config_err(at, e.to_string()))?;
        Ok(spec)
    }

    pub fn from_spec(spec: &LightSpec) -> Self {
        let (kind, position, direction) = match spec.kind {
            LightKind::Point { position } => (LightKindName::Point, Some(position), None),
            LightKind::Directional { direction } => (LightKindName::Directional, None, Some(direction)),
        };
        LightConfig {
            kind,
            position,
            direction,
            color: spec.color,
            radius: spec.radius,
            intensity: spec.intensity,
            azimuth: spec.angles.map(|a| a.azimuth),
            elevation: spec.angles.map(|a| a.elevation),
            distance: spec.angles.map(|a| a.distance),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    pub intrinsics: IntrinsicsConfig,
    #[serde(default)]
    pub lights: Vec<LightConfig>,
    #[serde(default)]
    pub primitives: Vec<Primitive>,
    #[serde(default)]
    pub lgi: LgiConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
}

/// A config after validation, with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct ResolvedScene {
    pub seed: Option<u64>,
    pub intrinsics: CameraIntrinsics,
    pub lights: Vec<LightSpec>,
    pub scene: AnalyticScene,
    pub lgi: LgiConfig,
    pub oracle: OracleConfig,
}

impl SceneConfig {
    pub fn from_suite_entry(entry: &SuiteEntry, seed: Option<u64>, lgi: LgiConfig) -> Self {
        SceneConfig {
            version: SCHEMA_VERSION.into(),
            seed,
            intrinsics: IntrinsicsConfig::explicit(&entry.intrinsics),
            lights: vec![LightConfig::from_spec(&entry.light)],
            primitives: entry.scene.primitives.clone(),
            lgi,
            oracle: OracleConfig::default(),
        }
    }

    pub fn resolve(&self) -> Result<ResolvedScene> {
        if self.version != SCHEMA_VERSION {
            return Err(config_err(
                "version",
                format!("unsupported version `{}`, expected `{SCHEMA_VERSION}`", self.version),
            ));
        }
        let intrinsics = self
            .intrinsics
            .resolve()
            .map_err(|e| config_err("intrinsics", e.to_string()))?;
        let lights = self
            .lights
            .iter()
            .enumerate()
            .map(|(i, l)| l.resolve(&format!("lights[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        for (i, p) in self.primitives.iter().enumerate() {
            p.validate().map_err(|e| config_err(format!("primitives[{i}]"), e.to_string()))?;
        }
        self.lgi.validate().map_err(|e| config_err("lgi", e.to_string()))?;
        if !(self.oracle.shadow_epsilon > 0.0) {
            return Err(config_err("oracle.shadow_epsilon", "must be > 0"));
        }
        Ok(ResolvedScene {
            seed: self.seed,
            intrinsics,
            lights,
            scene: AnalyticScene {
                primitives: self.primitives.clone(),
            },
            lgi: self.lgi,
            oracle: self.oracle,
        })
    }

    /// Parses and validates. Errors name the offending JSON path.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: SceneConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            let mut path = e.path().to_string();
            let message = e.inner().to_string();
            // Missing fields are reported at their parent; point at the field itself.
            if let Some(field) = message
                .strip_prefix("missing field `")
                .and_then(|rest| rest.split('`').next())
            {
                path = if path == "." { field.to_string() } else { format!("{path}.{field}") };
            }
            config_err(path, message)
        })?;
        cfg.resolve()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::InvalidArgument(e.to_string()))
    }
}

pub fn load_scene_config(path: impl AsRef<Path>) -> Result<SceneConfig> {
    SceneConfig::from_json(&fs::read_to_string(path)?)
}

pub fn save_scene_config(path: impl AsRef<Path>, cfg: &SceneConfig) -> Result<()> {
    let mut text = cfg.to_json()?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lgi::{DEFAULT_ETA, DEFAULT_N_SAMPLES};
    use crate::synth::scene_suite;

    const MINIMAL: &str = r#"{
        "version": "1",
        "intrinsics": {"width": 64, "height": 48},
        "lights": [{"kind": "point", "position": [0.5, -1.0, 1.0]}],
        "primitives": [{"kind": "sphere", "center": [0.0, 0.0, 2.0], "radius": 0.5}]
    }"#;

    fn path_of(text: &str) -> String {
        match SceneConfig::from_json(text) {
            Err(Error::Config { path, .. }) => path,
            other => panic!("expected a config error, got {other:?}"),
        }
    }

    #[test]
    fn minimal_config_takes_defaults() {
        let cfg = SceneConfig::from_json(MINIMAL).unwrap();
        let r = cfg.resolve().unwrap();
        assert_eq!(r.lgi.n_samples, DEFAULT_N_SAMPLES);
        assert_eq!(r.lgi.n_samples, 16);
        assert_eq!(r.lgi.eta, DEFAULT_ETA);
        assert!((r.lgi.eta.to_degrees() - 5.0).abs() < 1e-12);
        assert_eq!(r.intrinsics, CameraIntrinsics::default_for(64, 48));
        assert_eq!(r.lights[0].color, [1.0, 1.0, 1.0]);
        assert_eq!(r.lights[0].intensity, 1.0);
    }

    #[test]
    fn error_paths() {
        assert_eq!(
            path_of(r#"{"version":"1","intrinsics":{"width":4,"height":4},"lights":[{"position":[0,0,1]}]}"#),
            "lights[0].kind"
        );
        assert_eq!(path_of(r#"{"intrinsics":{"width":4,"height":4}}"#), "version");
        assert_eq!(
            path_of(r#"{"version":"1","intrinsics":{"width":4,"height":4},"bogus":1}"#),
            "bogus"
        );
        assert_eq!(
            path_of(r#"{"version":"1","intrinsics":{"width":4,"height":4,"fz":1}}"#),
            "intrinsics.fz"
        );
        assert_eq!(
            path_of(r#"{"version":"2","intrinsics":{"width":4,"height":4}}"#),
            "version"
        );
        assert_eq!(
            path_of(r#"{"version":"1","intrinsics":{"width":4,"height":4},"lights":[{"kind":"point"}]}"#),
            "lights[0].position"
        );
        assert_eq!(
            path_of(
                r#"{"version":"1","intrinsics":{"width":4,"height":4},"primitives":[{"kind":"sphere","center":[0,0,1],"radius":-1}]}"#
            ),
            "primitives[0]"
        );
        assert_eq!(
            path_of(r#"{"version":"1","intrinsics":{"width":4,"height":4},"lgi":{"n_samples":16,"extra":true}}"#),
            "lgi.extra"
        );
    }

    #[test]
    fn save_then_load_is_identity() {
        let cfg = SceneConfig::from_json(MINIMAL).unwrap();
        let back = SceneConfig::from_json(&cfg.to_json().unwrap()).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn suite_round_trip() {
        for entry in scene_suite(0) {
            let cfg = SceneConfig::from_suite_entry(&entry, Some(0), LgiConfig::default());
            let back = SceneConfig::from_json(&cfg.to_json().unwrap()).unwrap();
            assert_eq!(back, cfg);
            let r = back.resolve().unwrap();
            assert_eq!(r.intrinsics, entry.intrinsics);
            assert_eq!(r.lights, vec![entry.light]);
            assert_eq!(r.scene, entry.scene);
        }
    }
}

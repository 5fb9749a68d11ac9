//! Plain-text robot model files.
//!
//! One record per line, `#` starts a comment. Every record is a keyword, an
//! optional name and `key value..` fields with a fixed arity per key:
//!
//! ```text
//! units length m mass kg inertia kg*m^2 angle rad velocity rad/s acceleration rad/s^2 torque N*m
//! model PLANAR9
//! base floating
//! gravity 9.81
//! friction 0.7
//! link torso mass 20.0 inertia 0.6 com 0.0 0.3
//! joint l_hip parent torso child l_thigh origin -0.1 0.0 position -1.5 1.5 velocity 10.0 acceleration -50.0 50.0 torque -150.0 150.0 group leg
//! contact l_heel link l_foot offset -0.1 0.0
//! frame hand link hand offset 0.0 -0.1 angle 0.0
//! nominal base 0.0 0.77 0.0 joints -0.25 0.5 ..
//! ```
//!
//! Numbers are written with the shortest representation that parses back to
//! the same `f64`, so `parse(write(m)) == m` exactly.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use wbc_core::model::{
    BaseKind, Configuration, ContactPoint, FrameSpec, JointGroup, JointSpec, LinkSpec, ModelSpec, RobotModel,
};

const UNITS: &str = "units length m mass kg inertia kg*m^2 angle rad velocity rad/s acceleration rad/s^2 torque N*m";

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum ModelFileError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("missing `{0}` record")]
    Missing(&'static str),
    #[error(transparent)]
    Model(#[from] wbc_core::model::ModelError),
}

fn syntax(line: usize, msg: impl Into<String>) -> ModelFileError {
    ModelFileError::Syntax { line, msg: msg.into() }
}

/// Key/value fields of one record.
struct Fields<'a> {
    line: usize,
    values: HashMap<&'a str, Vec<&'a str>>,
}

impl<'a> Fields<'a> {
    fn parse(line: usize, tokens: &[&'a str], arity: &[(&'static str, usize)]) -> Result<Self, ModelFileError> {
        let mut values = HashMap::new();
        let mut i = 0;
        while i < tokens.len() {
            let key = tokens[i];
            let n = arity
                .iter()
                .find(|(k, _)| *k == key)
                .map(|(_, n)| *n)
                .ok_or_else(|| syntax(line, format!("unknown field `{key}`")))?;
            if i + 1 + n > tokens.len() {
                return Err(syntax(line, format!("field `{key}` needs {n} value(s)")));
            }
            if values.insert(key, tokens[i + 1..i + 1 + n].to_vec()).is_some() {
                return Err(syntax(line, format!("duplicate field `{key}`")));
            }
            i += 1 + n;
        }
        for (k, _) in arity {
            if !values.contains_key(k) {
                return Err(syntax(line, format!("missing field `{k}`")));
            }
        }
        Ok(Fields { line, values })
    }

    fn raw(&self, key: &str) -> &[&'a str] {
        &self.values[key]
    }

    fn floats<const N: usize>(&self, key: &str) -> Result<[f64; N], ModelFileError> {
        let mut out = [0.0; N];
        for (o, t) in out.iter_mut().zip(self.raw(key)) {
            *o = number(self.line, t)?;
        }
        Ok(out)
    }

    fn float(&self, key: &str) -> Result<f64, ModelFileError> {
        Ok(self.floats::<1>(key)?[0])
    }
}

fn number(line: usize, t: &str) -> Result<f64, ModelFileError> {
    t.parse::<f64>().map_err(|_| syntax(line, format!("`{t}` is not a number")))
}

fn link_ref(line: usize, names: &[String], name: &str) -> Result<usize, ModelFileError> {
    names.iter().position(|n| n == name).ok_or_else(|| syntax(line, format!("unknown link `{name}`")))
}

pub fn parse(text: &str) -> Result<RobotModel, ModelFileError> {
    let mut units_seen = false;
    let mut name = None;
    let mut base = None;
    let mut gravity = None;
    let mut friction = None;
    let mut links: Vec<LinkSpec> = Vec::new();
    let mut link_names: Vec<String> = Vec::new();
    let mut joints = Vec::new();
    let mut contacts = Vec::new();
    let mut hand = None;
    let mut left = None;
    let mut right = None;
    let mut nominal = None;

    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = content.split_whitespace().collect();
        let single = |what: &str| -> Result<&str, ModelFileError> {
            match tokens.len() {
                2 => Ok(tokens[1]),
                _ => Err(syntax(line, format!("`{what}` takes exactly one value"))),
            }
        };
        match tokens[0] {
            "units" => {
                if content.split_whitespace().collect::<Vec<_>>() != UNITS.split_whitespace().collect::<Vec<_>>() {
                    return Err(syntax(line, format!("unsupported units, expected `{UNITS}`")));
                }
                units_seen = true;
            }
            _ if !units_seen => return Err(syntax(line, "the units header must come first")),
            "model" => name = Some(single("model")?.to_string()),
            "base" => {
                base = Some(match single("base")? {
                    "floating" => BaseKind::Floating,
                    "fixed" => BaseKind::Fixed,
                    other => return Err(syntax(line, format!("unknown base kind `{other}`"))),
                })
            }
            "gravity" => gravity = Some(number(line, single("gravity")?)?),
            "friction" => friction = Some(number(line, single("friction")?)?),
            "link" => {
                let n = tokens.get(1).ok_or_else(|| syntax(line, "link needs a name"))?;
                let f = Fields::parse(line, &tokens[2..], &[("mass", 1), ("inertia", 1), ("com", 2)])?;
                link_names.push(n.to_string());
                links.push(LinkSpec {
                    name: n.to_string(),
                    mass: f.float("mass")?,
                    inertia: f.float("inertia")?,
                    com: f.floats("com")?,
                });
            }
            "joint" => {
                let n = tokens.get(1).ok_or_else(|| syntax(line, "joint needs a name"))?;
                let f = Fields::parse(
                    line,
                    &tokens[2..],
                    &[
                        ("parent", 1),
                        ("child", 1),
                        ("origin", 2),
                        ("position", 2),
                        ("velocity", 1),
                        ("acceleration", 2),
                        ("torque", 2),
                        ("group", 1),
                    ],
                )?;
                let group = match f.raw("group")[0] {
                    "leg" => JointGroup::Leg,
                    "arm" => JointGroup::Arm,
                    "other" => JointGroup::Other,
                    g => return Err(syntax(line, format!("unknown joint group `{g}`"))),
                };
                joints.push(JointSpec {
                    name: n.to_string(),
                    parent: link_ref(line, &link_names, f.raw("parent")[0])?,
                    child: link_ref(line, &link_names, f.raw("child")[0])?,
                    origin: f.floats("origin")?,
                    position_limits: f.floats("position")?,
                    velocity_limit: f.float("velocity")?,
                    accel_limits: f.floats("acceleration")?,
                    torque_limits: f.floats("torque")?,
                    group,
                });
            }
            "contact" => {
                let n = tokens.get(1).ok_or_else(|| syntax(line, "contact needs a name"))?;
                let f = Fields::parse(line, &tokens[2..], &[("link", 1), ("offset", 2)])?;
                contacts.push(ContactPoint {
                    name: n.to_string(),
                    link: link_ref(line, &link_names, f.raw("link")[0])?,
                    offset: f.floats("offset")?,
                });
            }
            "frame" => {
                let n = *tokens.get(1).ok_or_else(|| syntax(line, "frame needs a name"))?;
                let f = Fields::parse(line, &tokens[2..], &[("link", 1), ("offset", 2), ("angle", 1)])?;
                let spec = FrameSpec {
                    link: link_ref(line, &link_names, f.raw("link")[0])?,
                    offset: f.floats("offset")?,
                    angle: f.float("angle")?,
                };
                let slot = match n {
                    "hand" => &mut hand,
                    "left_foot" => &mut left,
                    "right_foot" => &mut right,
                    other => return Err(syntax(line, format!("unknown frame `{other}`"))),
                };
                if slot.replace(spec).is_some() {
                    return Err(syntax(line, format!("frame `{n}` defined twice")));
                }
            }
            "nominal" => {
                if tokens.get(1) != Some(&"base") || tokens.get(5) != Some(&"joints") {
                    return Err(syntax(line, "expected `nominal base x z theta joints q..`"));
                }
                let b: Vec<f64> = tokens[2..5].iter().map(|t| number(line, t)).collect::<Result<_, _>>()?;
                let q = tokens[6..].iter().map(|t| number(line, t)).collect::<Result<_, _>>()?;
                nominal = Some(Configuration { base_pose: [b[0], b[1], b[2]], joint_pos: q });
            }
            other => return Err(syntax(line, format!("unknown record `{other}`"))),
        }
    }
    if !units_seen {
        return Err(ModelFileError::Missing("units"));
    }
    let spec = ModelSpec {
        name: name.ok_or(ModelFileError::Missing("model"))?,
        base: base.ok_or(ModelFileError::Missing("base"))?,
        links,
        joints,
        contacts,
        hand: hand.ok_or(ModelFileError::Missing("frame hand"))?,
        feet: [
            left.ok_or(ModelFileError::Missing("frame left_foot"))?,
            right.ok_or(ModelFileError::Missing("frame right_foot"))?,
        ],
        friction_mu: friction.ok_or(ModelFileError::Missing("friction"))?,
        gravity: gravity.ok_or(ModelFileError::Missing("gravity"))?,
        nominal: nominal.ok_or(ModelFileError::Missing("nominal"))?,
    };
    Ok(RobotModel::new(spec)?)
}

pub fn write(model: &RobotModel) -> String {
    let s = model.spec();
    let mut out = String::new();
    let link = |i: usize| &s.links[i].name;
    let _ = writeln!(out, "# planar whole-body model");
    let _ = writeln!(out, "{UNITS}");
    let _ = writeln!(out, "model {}", s.name);
    let base = match s.base {
        BaseKind::Floating => "floating",
        BaseKind::Fixed => "fixed",
    };
    let _ = writeln!(out, "base {base}");
    let _ = writeln!(out, "gravity {:?}", s.gravity);
    let _ = writeln!(out, "friction {:?}", s.friction_mu);
    for l in &s.links {
        let _ = writeln!(
            out,
            "link {} mass {:?} inertia {:?} com {:?} {:?}",
            l.name, l.mass, l.inertia, l.com[0], l.com[1]
        );
    }
    for j in &s.joints {
        let group = match j.group {
            JointGroup::Leg => "leg",
            JointGroup::Arm => "arm",
            JointGroup::Other => "other",
        };
        let _ = writeln!(
            out,
            "joint {} parent {} child {} origin {:?} {:?} position {:?} {:?} velocity {:?} acceleration {:?} {:?} torque {:?} {:?} group {}",
            j.name,
            link(j.parent),
            link(j.child),
            j.origin[0],
            j.origin[1],
            j.position_limits[0],
            j.position_limits[1],
            j.velocity_limit,
            j.accel_limits[0],
            j.accel_limits[1],
            j.torque_limits[0],
            j.torque_limits[1],
            group
        );
    }
    for c in &s.contacts {
        let _ = writeln!(out, "contact {} link {} offset {:?} {:?}", c.name, link(c.link), c.offset[0], c.offset[1]);
    }
    for (n, f) in [("hand", &s.hand), ("left_foot", &s.feet[0]), ("right_foot", &s.feet[1])] {
        let _ = writeln!(
            out,
            "frame {n} link {} offset {:?} {:?} angle {:?}",
            link(f.link),
            f.offset[0],
            f.offset[1],
            f.angle
        );
    }
    let b = &s.nominal.base_pose;
    let _ = write!(out, "nominal base {:?} {:?} {:?} joints", b[0], b[1], b[2]);
    for q in &s.nominal.joint_pos {
        let _ = write!(out, " {q:?}");
    }
    out.push('\n');
    out
}

pub fn load(path: &Path) -> Result<RobotModel, crate::BenchError> {
    let text =
        std::fs::read_to_string(path).map_err(|source| crate::BenchError::Io { path: path.to_path_buf(), source })?;
    parse(&text).map_err(|source| crate::BenchError::ModelFile { path: path.to_path_buf(), source })
}

#[cfg(test)]
mod tests {
    use super::*;
    use wbc_core::model::planar9;

    #[test]
    fn round_trip_is_exact() {
        let m = planar9();
        assert_eq!(parse(&write(&m)).unwrap(), m);
    }

    #[test]
    fn reports_line_of_bad_record() {
        let text = write(&planar9()).replace("friction 0.7", "friction seven");
        assert!(matches!(parse(&text), Err(ModelFileError::Syntax { line: 6, .. })));
    }

    #[test]
    fn requires_units_header_first() {
        let text = write(&planar9()).replace(UNITS, "units length mm");
        assert!(matches!(parse(&text), Err(ModelFileError::Syntax { line: 2, .. })));
    }

    #[test]
    fn rejects_unknown_and_missing_fields() {
        let base = write(&planar9());
        let extra = base.replace("link torso mass", "link torso colour red mass");
        assert!(parse(&extra).is_err());
        let missing = base.replace(" inertia 0.6", "");
        assert!(parse(&missing).is_err());
        let unknown_link = base.replace("parent torso", "parent pelvis");
        assert!(parse(&unknown_link).is_err());
        let no_nominal: String = base.lines().filter(|l| !l.starts_with("nominal")).map(|l| format!("{l}\n")).collect();
        assert_eq!(parse(&no_nominal), Err(ModelFileError::Missing("nominal")));
    }
}

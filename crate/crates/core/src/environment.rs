//! The stage world: locations with their actor positions, the action
//! catalog with posture preconditions, and the shot catalog.
//!
//! Everything downstream (validator, workflow constraint checks, prompt
//! rendering) reads from an [`EnvironmentSpec`], which is immutable once
//! loaded and can be shared freely across threads.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::validator::RuleId;

/// Shipped world counts, enforced by `strict_counts`.
pub const FULL_LOCATIONS: usize = 15;
pub const FULL_POSITIONS: usize = 65;
pub const FULL_STANDING_POSITIONS: usize = 32;
pub const FULL_SITTABLE_POSITIONS: usize = 33;
pub const FULL_ACTIONS: usize = 21;
pub const FULL_STATIC_SHOTS: usize = 3;
pub const FULL_DYNAMIC_SHOTS: usize = 6;

#[derive(Debug, thiserror::Error)]
pub enum EnvironmentError {
    #[error("cannot read environment file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed environment file at {locus}: {message}")]
    Parse { locus: String, message: String },
    #[error("environment integrity violated: {0}")]
    Integrity(String),
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ResolveError {
    #[error("unknown action {name:?}; nearest: {}", .nearest.join(", "))]
    UnknownAction { name: String, nearest: Vec<String> },
    #[error("unknown shot {name:?}; nearest: {}", .nearest.join(", "))]
    UnknownShot { name: String, nearest: Vec<String> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Posture {
    Standing,
    Sitting,
}

impl Posture {
    pub fn as_str(self) -> &'static str {
        match self {
            Posture::Standing => "standing",
            Posture::Sitting => "sitting",
        }
    }
}

impl fmt::Display for Posture {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateEffect {
    None,
    ToSitting,
    ToStanding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShotKind {
    Static,
    Dynamic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositionSpec {
    pub id: String,
    pub description: String,
    pub sittable: bool,
    /// Filled in from the enclosing location at load time.
    #[serde(default)]
    pub location_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LocationSpec {
    pub name: String,
    pub capacity: usize,
    pub positions: Vec<PositionSpec>,
}

impl LocationSpec {
    pub fn position(&self, id: &str) -> Option<&PositionSpec> {
        self.positions.iter().find(|p| p.id == id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActionSpec {
    pub canonical_name: String,
    pub required_state: Posture,
    pub state_effect: StateEffect,
    #[serde(default)]
    pub aliases: Vec<String>,
    /// Names that are not valid actions but for which this action is the
    /// preferred fix. These never resolve; they only steer suggestions.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub replaces: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShotSpec {
    pub canonical_name: String,
    pub kind: ShotKind,
    #[serde(default)]
    pub aliases: Vec<String>,
    #[serde(default)]
    pub usage_rules: Vec<RuleId>,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
}

impl ShotSpec {
    pub fn has_rule(&self, rule: RuleId) -> bool {
        self.usage_rules.contains(&rule)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvironmentSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    pub locations: Vec<LocationSpec>,
    pub actions: Vec<ActionSpec>,
    pub shots: Vec<ShotSpec>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Require the full 15 / 65 (32 + 33) / 21 / 3 + 6 world.
    pub strict_counts: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EnvironmentStats {
    pub locations: usize,
    pub positions: usize,
    pub standing_positions: usize,
    pub sittable_positions: usize,
    pub actions: usize,
    pub shots: usize,
    pub static_shots: usize,
    pub dynamic_shots: usize,
}

impl fmt::Display for EnvironmentStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} locations, {} positions ({} standing / {} sitting), {} actions, {} shots",
            self.locations,
            self.positions,
            self.standing_positions,
            self.sittable_positions,
            self.actions,
            self.shots
        )
    }
}

pub fn load_environment(path: impl AsRef<Path>) -> Result<EnvironmentSpec, EnvironmentError> {
    load_environment_with(path, LoadOptions::default())
}

pub fn load_environment_with(
    path: impl AsRef<Path>,
    options: LoadOptions,
) -> Result<EnvironmentSpec, EnvironmentError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| EnvironmentError::Io {
        path: path.display().to_string(),
        source,
    })?;
    EnvironmentSpec::from_json_str(&text, options)
}

impl EnvironmentSpec {
    pub fn from_json_str(text: &str, options: LoadOptions) -> Result<Self, EnvironmentError> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let mut env: EnvironmentSpec = serde_path_to_error::deserialize(de).map_err(|e| {
            let locus = e.path().to_string();
            EnvironmentError::Parse {
                locus,
                message: e.into_inner().to_string(),
            }
        })?;
        env.resolve_references()?;
        env.check_integrity(options)?;
        Ok(env)
    }

    fn resolve_references(&mut self) -> Result<(), EnvironmentError> {
        for loc in &mut self.locations {
            for pos in &mut loc.positions {
                if pos.location_id.is_empty() {
                    pos.location_id = loc.name.clone();
                } else if pos.location_id != loc.name {
                    return Err(EnvironmentError::Integrity(format!(
                        "position {:?} in location {:?} references location {:?}",
                        pos.id, loc.name, pos.location_id
                    )));
                }
            }
        }
        Ok(())
    }

    /// Checks every type invariant, reporting the first one that fails.
    pub fn check_integrity(&self, options: LoadOptions) -> Result<(), EnvironmentError> {
        let fail = |msg: String| Err(EnvironmentError::Integrity(msg));
        if self.locations.is_empty() {
            return fail("environment has no locations".into());
        }
        let mut names = HashSet::new();
        for loc in &self.locations {
            if !names.insert(loc.name.as_str()) {
                return fail(format!("duplicate location name {:?}", loc.name));
            }
            if loc.capacity < 2 {
                return fail(format!(
                    "location {:?} has capacity {} (minimum 2)",
                    loc.name, loc.capacity
                ));
            }
            if loc.positions.is_empty() {
                return fail(format!("location {:?} has no positions", loc.name));
            }
            let mut ids = HashSet::new();
            for pos in &loc.positions {
                if !ids.insert(pos.id.as_str()) {
                    return fail(format!(
                        "duplicate position {:?} in location {:?}",
                        pos.id, loc.name
                    ));
                }
                if pos.description.trim().is_empty() {
                    return fail(format!(
                        "position {:?} in location {:?} has an empty description",
                        pos.id, loc.name
                    ));
                }
            }
        }

        let mut seen_names: HashSet<String> = HashSet::new();
        let mut sit = 0;
        let mut stand = 0;
        for action in &self.actions {
            for name in std::iter::once(&action.canonical_name).chain(&action.aliases) {
                if !seen_names.insert(normalize(name)) {
                    return fail(format!("action name or alias {name:?} is not unique"));
                }
            }
            match action.state_effect {
                StateEffect::None => {}
                StateEffect::ToSitting => {
                    sit += 1;
                    if action.required_state != Posture::Standing {
                        return fail(format!(
                            "{:?} changes posture to sitting but does not require standing",
                            action.canonical_name
                        ));
                    }
                }
                StateEffect::ToStanding => {
                    stand += 1;
                    if action.required_state != Posture::Sitting {
                        return fail(format!(
                            "{:?} changes posture to standing but does not require sitting",
                            action.canonical_name
                        ));
                    }
                }
            }
        }
        if sit != 1 || stand != 1 {
            return fail(format!(
                "expected exactly one sit action and one stand action, found {sit} and {stand}"
            ));
        }
        for action in &self.actions {
            for hint in &action.replaces {
                if seen_names.contains(&normalize(hint)) {
                    return fail(format!(
                        "replacement hint {hint:?} collides with a valid action name"
                    ));
                }
            }
        }

        let mut shot_names: HashSet<String> = HashSet::new();
        for shot in &self.shots {
            for name in std::iter::once(&shot.canonical_name).chain(&shot.aliases) {
                if !shot_names.insert(normalize(name)) {
                    return fail(format!("shot name or alias {name:?} is not unique"));
                }
            }
        }
        if self.shots.is_empty() {
            return fail("environment has no shots".into());
        }

        if options.strict_counts {
            let stats = self.stats();
            let expected = [
                ("locations", stats.locations, FULL_LOCATIONS),
                ("positions", stats.positions, FULL_POSITIONS),
                ("standing positions", stats.standing_positions, FULL_STANDING_POSITIONS),
                ("sittable positions", stats.sittable_positions, FULL_SITTABLE_POSITIONS),
                ("actions", stats.actions, FULL_ACTIONS),
                ("static shots", stats.static_shots, FULL_STATIC_SHOTS),
                ("dynamic shots", stats.dynamic_shots, FULL_DYNAMIC_SHOTS),
            ];
            for (what, got, want) in expected {
                if got != want {
                    return fail(format!("strict counts: expected {want} {what}, found {got}"));
                }
            }
        }
        Ok(())
    }

    pub fn stats(&self) -> EnvironmentStats {
        let positions: Vec<&PositionSpec> =
            self.locations.iter().flat_map(|l| &l.positions).collect();
        let sittable = positions.iter().filter(|p| p.sittable).count();
        let static_shots = self
            .shots
            .iter()
            .filter(|s| s.kind == ShotKind::Static)
            .count();
        EnvironmentStats {
            locations: self.locations.len(),
            positions: positions.len(),
            standing_positions: positions.len() - sittable,
            sittable_positions: sittable,
            actions: self.actions.len(),
            shots: self.shots.len(),
            static_shots,
            dynamic_shots: self.shots.len() - static_shots,
        }
    }

    pub fn location(&self, name: &str) -> Option<&LocationSpec> {
        self.locations.iter().find(|l| l.name == name).or_else(|| {
            let wanted = normalize(name);
            self.locations.iter().find(|l| normalize(&l.name) == wanted)
        })
    }

    pub fn resolve_action(&self, name: &str) -> Result<&ActionSpec, ResolveError> {
        resolve_in(&self.actions, name, |a| &a.canonical_name, |a| &a.aliases).ok_or_else(|| {
            ResolveError::UnknownAction {
                name: name.to_string(),
                nearest: self.nearest_actions(name, 3),
            }
        })
    }

    pub fn resolve_shot(&self, name: &str) -> Result<&ShotSpec, ResolveError> {
        resolve_in(&self.shots, name, |s| &s.canonical_name, |s| &s.aliases).ok_or_else(|| {
            ResolveError::UnknownShot {
                name: name.to_string(),
                nearest: self.nearest_shots(name, 3),
            }
        })
    }

    pub fn action(&self, canonical: &str) -> Option<&ActionSpec> {
        self.actions.iter().find(|a| a.canonical_name == canonical)
    }

    pub fn shot(&self, canonical: &str) -> Option<&ShotSpec> {
        self.shots.iter().find(|s| s.canonical_name == canonical)
    }

    pub fn nearest_actions(&self, name: &str, n: usize) -> Vec<String> {
        nearest(self.actions.iter().map(|a| a.canonical_name.as_str()), name, n)
            .into_iter()
            .map(|(c, _)| c.to_string())
            .collect()
    }

    pub fn nearest_shots(&self, name: &str, n: usize) -> Vec<String> {
        nearest(self.shots.iter().map(|s| s.canonical_name.as_str()), name, n)
            .into_iter()
            .map(|(c, _)| c.to_string())
            .collect()
    }

    /// Replacement for an unresolvable action name: a catalog hint if one
    /// names it, otherwise the nearest canonical name within
    /// [`SUGGESTION_MAX_DISTANCE`].
    pub fn suggest_action(&self, name: &str) -> Option<String> {
        let wanted = normalize(name);
        if let Some(a) = self
            .actions
            .iter()
            .find(|a| a.replaces.iter().any(|h| normalize(h) == wanted))
        {
            return Some(a.canonical_name.clone());
        }
        closest_within(self.actions.iter().map(|a| a.canonical_name.as_str()), name)
    }

    pub fn suggest_shot(&self, name: &str) -> Option<String> {
        closest_within(self.shots.iter().map(|s| s.canonical_name.as_str()), name)
    }

    /// Every name (canonical plus alias) that resolves to an action.
    pub fn action_names(&self) -> BTreeSet<String> {
        self.actions
            .iter()
            .flat_map(|a| std::iter::once(&a.canonical_name).chain(&a.aliases))
            .cloned()
            .collect()
    }

    pub fn shot_names(&self) -> BTreeSet<String> {
        self.shots
            .iter()
            .flat_map(|s| std::iter::once(&s.canonical_name).chain(&s.aliases))
            .cloned()
            .collect()
    }
}

/// Largest normalized edit distance for which a nearest-name suggestion is
/// offered.
pub const SUGGESTION_MAX_DISTANCE: f64 = 0.5;

pub(crate) fn normalize(name: &str) -> String {
    name.split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .to_lowercase()
}

fn resolve_in<'a, T>(
    items: &'a [T],
    name: &str,
    canonical: impl Fn(&T) -> &String,
    aliases: impl Fn(&T) -> &Vec<String>,
) -> Option<&'a T> {
    let wanted = normalize(name);
    items
        .iter()
        .find(|item| normalize(canonical(item)) == wanted)
        .or_else(|| {
            items
                .iter()
                .find(|item| aliases(item).iter().any(|a| normalize(a) == wanted))
        })
}

/// Levenshtein distance over normalized names, scaled by the longer length.
pub fn name_distance(a: &str, b: &str) -> f64 {
    let (a, b) = (normalize(a), normalize(b));
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 0.0;
    }
    strsim::levenshtein(&a, &b) as f64 / longest as f64
}

fn nearest<'a>(
    candidates: impl Iterator<Item = &'a str>,
    name: &str,
    n: usize,
) -> Vec<(&'a str, f64)> {
    let mut scored: Vec<(&str, f64)> = candidates.map(|c| (c, name_distance(name, c))).collect();
    // Stable sort keeps catalog order among ties.
    scored.sort_by(|x, y| x.1.total_cmp(&y.1));
    scored.truncate(n);
    scored
}

fn closest_within<'a>(candidates: impl Iterator<Item = &'a str>, name: &str) -> Option<String> {
    nearest(candidates, name, 1)
        .into_iter()
        .find(|(_, d)| *d <= SUGGESTION_MAX_DISTANCE)
        .map(|(c, _)| c.to_string())
}

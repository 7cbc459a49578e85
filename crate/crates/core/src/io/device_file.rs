//! INI-style device description files.
//!
//! ```text
//! [magnet]
//! length_m = 4e-3
//! radius_m = 1e-3
//! remanence_T = 1.0
//! recoil_mu_r = 1.05
//!
//! [airgap]
//! length_m = 0.2e-3
//! area_m2 = 4e-6
//!
//! [material.soft]
//! kind = tanh
//! mu_i_rel = 1e5
//! js_T = 0.75
//!
//! [shunt.1]
//! length_m = 4e-3
//! radius_m = 1e-3
//! turns = 30
//! material = soft
//!
//! [shunt.2]
//! length_m = 4e-3
//! radius_m = 1e-3
//! turns = 30
//! material = soft
//! ```

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::sync::Arc;

use thiserror::Error;

use crate::circuit::{AirGap, Device, Magnet, Orientation, Shunt};
use crate::design::{CoreCapacity, PrimaryCoreModel};
use crate::materials::{BhTable, MaterialKind, MaterialModel};
use crate::MU_0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax(String),
    UnknownSection(String),
    DuplicateSection(String),
    UnknownKey,
    DuplicateKey,
    /// The key names a known quantity with the wrong or missing unit suffix.
    UnitSuffix {
        expected: String,
    },
    MissingSection(String),
    MissingKey,
    BadValue(String),
    UnresolvedMaterial(String),
    ShuntNumbering(String),
    Invalid(String),
}

/// A device-file error with the 1-based line it refers to.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub struct ParseError {
    pub line: usize,
    pub key: Option<String>,
    pub kind: ParseErrorKind,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: ", self.line)?;
        let key = self.key.as_deref().unwrap_or("");
        match &self.kind {
            ParseErrorKind::Syntax(m) => write!(f, "syntax error: {m}"),
            ParseErrorKind::UnknownSection(s) => write!(f, "unknown section [{s}]"),
            ParseErrorKind::DuplicateSection(s) => write!(f, "duplicate section [{s}]"),
            ParseErrorKind::UnknownKey => write!(f, "unknown key '{key}'"),
            ParseErrorKind::DuplicateKey => write!(f, "duplicate key '{key}'"),
            ParseErrorKind::UnitSuffix { expected } => {
                write!(f, "key '{key}' has the wrong unit suffix, expected '{expected}'")
            }
            ParseErrorKind::MissingSection(s) => write!(f, "missing section [{s}]"),
            ParseErrorKind::MissingKey => write!(f, "missing key '{key}'"),
            ParseErrorKind::BadValue(m) => write!(f, "bad value for '{key}': {m}"),
            ParseErrorKind::UnresolvedMaterial(m) => write!(f, "key '{key}': no [material.{m}] section"),
            ParseErrorKind::ShuntNumbering(m) => write!(f, "shunt numbering: {m}"),
            ParseErrorKind::Invalid(m) => write!(f, "invalid {key}: {m}"),
        }
    }
}

/// A parsed device together with its material registry and optional
/// primary-core data.
#[derive(Debug, Clone, PartialEq)]
pub struct DeviceFile {
    pub device: Device,
    pub materials: BTreeMap<String, Arc<MaterialModel>>,
    pub core: Option<PrimaryCoreModel>,
    /// Primary-core saturation flux density (T), used by D1.
    pub core_b_sat: Option<f64>,
}

impl DeviceFile {
    pub fn core_capacity(&self) -> Option<CoreCapacity> {
        match (self.core, self.core_b_sat) {
            (Some(c), Some(b)) => Some(CoreCapacity { area: c.area, b_sat: b }),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SectionKind {
    Magnet,
    Airgap,
    Leakage,
    Shunt,
    Material,
    PrimaryCore,
}

/// `(key, quantity stem)`; the stem is `None` for dimensionless keys.
type KeySpec = (&'static str, Option<&'static str>);

impl SectionKind {
    fn keys(self) -> &'static [KeySpec] {
        match self {
            SectionKind::Magnet => &[
                ("length_m", Some("length")),
                ("radius_m", Some("radius")),
                ("area_m2", Some("area")),
                ("remanence_T", Some("remanence")),
                ("recoil_mu_r", None),
            ],
            SectionKind::Airgap => &[("length_m", Some("length")), ("area_m2", Some("area"))],
            SectionKind::Leakage => &[("reluctance_per_H", Some("reluctance"))],
            SectionKind::Shunt => &[
                ("length_m", Some("length")),
                ("radius_m", Some("radius")),
                ("area_m2", Some("area")),
                ("turns", None),
                ("orientation", None),
                ("material", None),
                ("solenoid_area_m2", Some("solenoid_area")),
                ("solenoid_length_m", Some("solenoid_length")),
            ],
            SectionKind::Material => &[
                ("kind", None),
                ("mu_rel", None),
                ("mu_i_rel", None),
                ("js_T", Some("js")),
                ("bh", None),
            ],
            SectionKind::PrimaryCore => &[
                ("mean_path_m", Some("mean_path")),
                ("area_m2", Some("area")),
                ("mu_rel", None),
                ("bsat_T", Some("bsat")),
            ],
        }
    }
}

#[derive(Debug)]
struct Section {
    kind: SectionKind,
    /// Suffix after the dot for `shunt.k` and `material.name`.
    label: String,
    line: usize,
    entries: BTreeMap<String, (String, usize)>,
}

impl Section {
    fn err(&self, line: usize, key: &str, kind: ParseErrorKind) -> ParseError {
        ParseError {
            line,
            key: Some(key.to_string()),
            kind,
        }
    }

    fn raw(&self, key: &str) -> Option<(&str, usize)> {
        self.entries.get(key).map(|(v, l)| (v.as_str(), *l))
    }

    fn require(&self, key: &str) -> Result<(&str, usize), ParseError> {
        self.raw(key)
            .ok_or_else(|| self.err(self.line, key, ParseErrorKind::MissingKey))
    }

    fn number(&self, key: &str) -> Result<Option<f64>, ParseError> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => parse_f64(v)
                .map(Some)
                .map_err(|m| self.err(line, key, ParseErrorKind::BadValue(m))),
        }
    }

    fn required_number(&self, key: &str) -> Result<f64, ParseError> {
        self.require(key)?;
        Ok(self.number(key)?.expect("present"))
    }

    fn line_of(&self, key: &str) -> usize {
        self.raw(key).map_or(self.line, |(_, l)| l)
    }

    /// Area from `area_m2` or `radius_m` (exactly one), with the radius
    /// when given.
    fn area(&self) -> Result<(f64, Option<f64>), ParseError> {
        match (self.number("area_m2")?, self.number("radius_m")?) {
            (Some(_), Some(_)) => Err(self.err(
                self.line_of("radius_m"),
                "radius_m",
                ParseErrorKind::BadValue("give either area_m2 or radius_m, not both".into()),
            )),
            (Some(a), None) => Ok((a, None)),
            (None, Some(r)) => Ok((std::f64::consts::PI * r * r, Some(r))),
            (None, None) => Err(self.err(self.line, "area_m2", ParseErrorKind::MissingKey)),
        }
    }
}

fn parse_f64(v: &str) -> Result<f64, String> {
    let x: f64 = v.trim().parse().map_err(|_| format!("'{v}' is not a number"))?;
    if x.is_finite() {
        Ok(x)
    } else {
        Err(format!("'{v}' is not finite"))
    }
}

fn is_identifier(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-')
}

fn split_sections(text: &str) -> Result<(Vec<Section>, usize), ParseError> {
    let mut sections: Vec<Section> = Vec::new();
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let content = raw.split(['#', ';']).next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let syntax = |m: &str| ParseError {
            line,
            key: None,
            kind: ParseErrorKind::Syntax(m.to_string()),
        };
        if let Some(rest) = content.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| syntax("section header must end with ']'"))?
                .trim();
            let (head, label) = match name.split_once('.') {
                Some((h, l)) => (h, l.to_string()),
                None => (name, String::new()),
            };
            let kind = match (head, label.is_empty()) {
                ("magnet", true) => SectionKind::Magnet,
                ("airgap", true) => SectionKind::Airgap,
                ("leakage", true) => SectionKind::Leakage,
                ("primary_core", true) => SectionKind::PrimaryCore,
                ("shunt", false) => SectionKind::Shunt,
                ("material", false) if is_identifier(&label) => SectionKind::Material,
                _ => {
                    return Err(ParseError {
                        line,
                        key: None,
                        kind: ParseErrorKind::UnknownSection(name.to_string()),
                    })
                }
            };
            if sections.iter().any(|s| s.kind == kind && s.label == label) {
                return Err(ParseError {
                    line,
                    key: None,
                    kind: ParseErrorKind::DuplicateSection(name.to_string()),
                });
            }
            sections.push(Section {
                kind,
                label,
                line,
                entries: BTreeMap::new(),
            });
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| syntax("expected 'key = value'"))?;
        let (key, value) = (key.trim(), value.trim());
        let section = sections.last_mut().ok_or_else(|| syntax("key outside any section"))?;
        if key.is_empty() {
            return Err(syntax("empty key"));
        }
        check_key(section.kind, key, line)?;
        if section.entries.contains_key(key) {
            return Err(section.err(line, key, ParseErrorKind::DuplicateKey));
        }
        section.entries.insert(key.to_string(), (value.to_string(), line));
    }
    Ok((sections, last_line + 1))
}

fn check_key(kind: SectionKind, key: &str, line: usize) -> Result<(), ParseError> {
    let keys = kind.keys();
    if keys.iter().any(|(k, _)| *k == key) {
        return Ok(());
    }
    let err = |kind| ParseError {
        line,
        key: Some(key.to_string()),
        kind,
    };
    // longest matching stem wins so solenoid_length_mm is not read as length
    let stem_match = keys
        .iter()
        .filter_map(|(k, stem)| stem.map(|s| (*k, s)))
        .filter(|(_, stem)| key == *stem || key.strip_prefix(stem).is_some_and(|r| r.starts_with('_')))
        .max_by_key(|(_, stem)| stem.len());
    match stem_match {
        Some((expected, _)) => Err(err(ParseErrorKind::UnitSuffix {
            expected: expected.to_string(),
        })),
        None => Err(err(ParseErrorKind::UnknownKey)),
    }
}

fn parse_material(sec: &Section) -> Result<MaterialModel, ParseError> {
    let (kind, kind_line) = sec.require("kind")?;
    let name = sec.label.clone();
    let allowed: &[&str] = match kind {
        "linear" => &["kind", "mu_rel"],
        "table" => &["kind", "bh"],
        "tanh" => &["kind", "mu_i_rel", "js_T"],
        other => {
            return Err(sec.err(
                kind_line,
                "kind",
                ParseErrorKind::BadValue(format!("'{other}' is not linear, table or tanh")),
            ))
        }
    };
    if let Some((k, (_, line))) = sec.entries.iter().find(|(k, _)| !allowed.contains(&k.as_str())) {
        return Err(sec.err(*line, k, ParseErrorKind::BadValue(format!("not used by kind = {kind}"))));
    }
    let invalid =
        |key: &str, e: &dyn fmt::Display| sec.err(sec.line_of(key), key, ParseErrorKind::Invalid(e.to_string()));
    match kind {
        "linear" => MaterialModel::linear(name, sec.required_number("mu_rel")?).map_err(|e| invalid("mu_rel", &e)),
        "tanh" => {
            let mu_i = sec.required_number("mu_i_rel")? * MU_0;
            let js = sec.required_number("js_T")?;
            MaterialModel::saturating(name, mu_i, js).map_err(|e| invalid("mu_i_rel", &e))
        }
        _ => {
            let (bh, line) = sec.require("bh")?;
            let mut points = Vec::new();
            for pair in bh.split(',') {
                let bad = |m: String| sec.err(line, "bh", ParseErrorKind::BadValue(m));
                let (h, b) = pair
                    .split_once(':')
                    .ok_or_else(|| bad(format!("'{}' is not H:B", pair.trim())))?;
                points.push((parse_f64(h).map_err(bad)?, parse_f64(b).map_err(bad)?));
            }
            let table = BhTable::new(points).map_err(|e| invalid("bh", &e))?;
            MaterialModel::from_table(name, table).map_err(|e| invalid("bh", &e))
        }
    }
}

/// Parse a device file.
pub fn parse_device(text: &str) -> Result<DeviceFile, ParseError> {
    let (sections, end_line) = split_sections(text)?;
    let find = |kind: SectionKind| sections.iter().find(|s| s.kind == kind);
    let missing = |name: &str| ParseError {
        line: end_line,
        key: None,
        kind: ParseErrorKind::MissingSection(name.to_string()),
    };

    let mut materials = BTreeMap::new();
    for sec in sections.iter().filter(|s| s.kind == SectionKind::Material) {
        materials.insert(sec.label.clone(), Arc::new(parse_material(sec)?));
    }

    let m = find(SectionKind::Magnet).ok_or_else(|| missing("magnet"))?;
    let (m_area, m_radius) = m.area()?;
    let m_invalid = |e: &dyn fmt::Display| m.err(m.line, "magnet", ParseErrorKind::Invalid(e.to_string()));
    let (len, br, mur) = (
        m.required_number("length_m")?,
        m.required_number("remanence_T")?,
        m.required_number("recoil_mu_r")?,
    );
    let magnet = match m_radius {
        Some(r) => Magnet::cylindrical(len, r, br, mur),
        None => Magnet::new(len, m_area, br, mur),
    }
    .map_err(|e| m_invalid(&e))?;

    let g = find(SectionKind::Airgap).ok_or_else(|| missing("airgap"))?;
    let gap = AirGap::new(g.required_number("length_m")?, g.required_number("area_m2")?)
        .map_err(|e| g.err(g.line, "airgap", ParseErrorKind::Invalid(e.to_string())))?;

    let leakage = match find(SectionKind::Leakage) {
        Some(l) => Some(l.required_number("reluctance_per_H")?),
        None => None,
    };

    let mut numbered: Vec<(usize, &Section)> = Vec::new();
    for sec in sections.iter().filter(|s| s.kind == SectionKind::Shunt) {
        let k: usize = sec.label.parse().ok().filter(|k| *k >= 1).ok_or_else(|| ParseError {
            line: sec.line,
            key: None,
            kind: ParseErrorKind::ShuntNumbering(format!("'{}' is not a positive integer", sec.label)),
        })?;
        numbered.push((k, sec));
    }
    numbered.sort_by_key(|(k, _)| *k);
    if numbered.is_empty() {
        return Err(missing("shunt.1"));
    }
    for (i, (k, sec)) in numbered.iter().enumerate() {
        if *k != i + 1 {
            return Err(ParseError {
                line: sec.line,
                key: None,
                kind: ParseErrorKind::ShuntNumbering(format!("expected [shunt.{}], found [shunt.{k}]", i + 1)),
            });
        }
    }

    let mut shunts = Vec::new();
    for (k, sec) in &numbered {
        let (mat_name, mat_line) = sec.require("material")?;
        let material = materials.get(mat_name).cloned().ok_or_else(|| {
            sec.err(
                mat_line,
                "material",
                ParseErrorKind::UnresolvedMaterial(mat_name.into()),
            )
        })?;
        let (turns_raw, turns_line) = sec.require("turns")?;
        let turns: u32 = turns_raw.parse().map_err(|_| {
            sec.err(
                turns_line,
                "turns",
                ParseErrorKind::BadValue(format!("'{turns_raw}' is not a non-negative integer")),
            )
        })?;
        let orientation = match sec.raw("orientation") {
            None => Orientation::alternating(*k),
            Some((v, line)) => v.parse::<i32>().ok().and_then(Orientation::from_sign).ok_or_else(|| {
                sec.err(
                    line,
                    "orientation",
                    ParseErrorKind::BadValue(format!("'{v}' is not -1 or 1")),
                )
            })?,
        };
        let length = sec.required_number("length_m")?;
        let (area, radius) = sec.area()?;
        let invalid = |e: &dyn fmt::Display| ParseError {
            line: sec.line,
            key: Some(format!("shunt.{k}")),
            kind: ParseErrorKind::Invalid(e.to_string()),
        };
        let mut shunt = match radius {
            Some(r) => Shunt::cylindrical(length, r, turns, orientation, material),
            None => Shunt::new(length, area, turns, orientation, material),
        }
        .map_err(|e| invalid(&e))?;
        let sol_area = sec.number("solenoid_area_m2")?;
        let sol_len = sec.number("solenoid_length_m")?;
        if sol_area.is_some() || sol_len.is_some() {
            let a = sol_area.unwrap_or(shunt.area());
            let l = sol_len.unwrap_or(shunt.length());
            shunt = shunt.with_solenoid(a, l).map_err(|e| invalid(&e))?;
        }
        shunts.push(shunt);
    }

    let device = Device::new(magnet, gap, leakage, shunts).map_err(|e| ParseError {
        line: end_line,
        key: None,
        kind: ParseErrorKind::Invalid(e.to_string()),
    })?;

    let (core, core_b_sat) = match find(SectionKind::PrimaryCore) {
        Some(c) => {
            let model = PrimaryCoreModel::new(
                c.required_number("mean_path_m")?,
                c.required_number("area_m2")?,
                c.required_number("mu_rel")?,
            )
            .map_err(|e| c.err(c.line, "primary_core", ParseErrorKind::Invalid(e.to_string())))?;
            let b = c.number("bsat_T")?;
            if let Some(b) = b {
                if b <= 0.0 {
                    return Err(c.err(
                        c.line_of("bsat_T"),
                        "bsat_T",
                        ParseErrorKind::BadValue("must be positive".into()),
                    ));
                }
            }
            (Some(model), b)
        }
        None => (None, None),
    };

    Ok(DeviceFile {
        device,
        materials,
        core,
        core_b_sat,
    })
}

/// `mu_i_rel` whose parse reproduces the stored `chi` bit for bit when such
/// a neighbour exists.
fn mu_i_rel_for(chi: f64) -> f64 {
    let x0 = (chi + MU_0) / MU_0;
    let mut x = x0;
    for _ in 0..16 {
        if x * MU_0 - MU_0 == chi {
            return x;
        }
        x = f64::from_bits(x.to_bits() + 1);
    }
    let mut x = x0;
    for _ in 0..16 {
        if x * MU_0 - MU_0 == chi {
            return x;
        }
        x = f64::from_bits(x.to_bits() - 1);
    }
    x0
}

fn write_material(out: &mut String, name: &str, m: &MaterialModel) {
    let _ = writeln!(out, "[material.{name}]");
    match m.kind() {
        MaterialKind::Linear { mu_rel } => {
            let _ = writeln!(out, "kind = linear\nmu_rel = {mu_rel:e}");
        }
        MaterialKind::Tanh { js, chi } => {
            let _ = writeln!(out, "kind = tanh\nmu_i_rel = {:e}\njs_T = {js:e}", mu_i_rel_for(*chi));
        }
        MaterialKind::Table { table, .. } => {
            let pairs: Vec<String> = table.points().iter().map(|(h, b)| format!("{h:e}:{b:e}")).collect();
            let _ = writeln!(out, "kind = table\nbh = {}", pairs.join(", "));
        }
    }
    out.push('\n');
}

/// Write `file` back in device-file syntax.
pub fn serialize_device(file: &DeviceFile) -> String {
    let mut out = String::new();
    let d = &file.device;
    let m = d.magnet();
    let _ = writeln!(out, "[magnet]\nlength_m = {:e}", m.length());
    match m.radius() {
        Some(r) => {
            let _ = writeln!(out, "radius_m = {r:e}");
        }
        None => {
            let _ = writeln!(out, "area_m2 = {:e}", m.area());
        }
    }
    let _ = writeln!(
        out,
        "remanence_T = {:e}\nrecoil_mu_r = {:e}\n",
        m.remanence(),
        m.recoil_mu_r()
    );
    let _ = writeln!(
        out,
        "[airgap]\nlength_m = {:e}\narea_m2 = {:e}\n",
        d.gap().length(),
        d.gap().area()
    );
    if let Some(r) = d.leakage_reluctance() {
        let _ = writeln!(out, "[leakage]\nreluctance_per_H = {r:e}\n");
    }

    // every material used by a shunt must be in the registry under its name
    let mut registry: BTreeMap<String, Arc<MaterialModel>> = file.materials.clone();
    for s in d.shunts() {
        registry
            .entry(s.material().name().to_string())
            .or_insert_with(|| s.material().clone());
    }
    for (name, mat) in &registry {
        write_material(&mut out, name, mat);
    }

    for (i, s) in d.shunts().iter().enumerate() {
        let _ = writeln!(out, "[shunt.{}]\nlength_m = {:e}", i + 1, s.length());
        match s.radius() {
            Some(r) => {
                let _ = writeln!(out, "radius_m = {r:e}");
            }
            None => {
                let _ = writeln!(out, "area_m2 = {:e}", s.area());
            }
        }
        let name = registry
            .iter()
            .find(|(_, m)| Arc::ptr_eq(m, s.material()) || ***m == **s.material())
            .map(|(n, _)| n.clone())
            .unwrap_or_else(|| s.material().name().to_string());
        let _ = writeln!(
            out,
            "turns = {}\norientation = {}\nmaterial = {name}",
            s.turns(),
            s.orientation().sign() as i32
        );
        if s.solenoid_area() != s.area() {
            let _ = writeln!(out, "solenoid_area_m2 = {:e}", s.solenoid_area());
        }
        if s.solenoid_length() != s.length() {
            let _ = writeln!(out, "solenoid_length_m = {:e}", s.solenoid_length());
        }
        out.push('\n');
    }

    if let Some(c) = &file.core {
        let _ = writeln!(
            out,
            "[primary_core]\nmean_path_m = {:e}\narea_m2 = {:e}\nmu_rel = {:e}",
            c.mean_path, c.area, c.mu_rel
        );
        if let Some(b) = file.core_b_sat {
            let _ = writeln!(out, "bsat_T = {b:e}");
        }
        out.push('\n');
    }
    out
}

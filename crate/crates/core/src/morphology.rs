//! Parametric design space for the planar quadruped.
//!
//! A design is a torso plus two leg assemblies (front and rear), each made of
//! an upper and a lower segment. Designs are plain values; every operation in
//! this module is a pure function.

use std::fmt;

use thiserror::Error;

/// Cross-section thickness shared by every leg segment, in meters.
pub const LINK_THICKNESS: f64 = 0.04;

/// Significant digits used when printing design values.
pub const DESIGN_DIGITS: usize = 9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DesignError {
    #[error("unknown design parameter `{0}`")]
    UnknownParameter(String),
    #[error("design parameter `{0}` targeted more than once")]
    DuplicateParameter(String),
    #[error("edit yields an infeasible design: {}", .0.join("; "))]
    InfeasibleResult(Vec<String>),
    #[error("malformed design xml: {0}")]
    MalformedXml(String),
    #[error("missing design field `{0}`")]
    MissingField(String),
    #[error("design field `{field}` = {value} is outside [{lo}, {hi}]")]
    OutOfBounds {
        field: String,
        value: f64,
        lo: f64,
        hi: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LegSide {
    Front,
    Rear,
}

impl LegSide {
    pub const ALL: [LegSide; 2] = [LegSide::Front, LegSide::Rear];

    pub fn name(self) -> &'static str {
        match self {
            LegSide::Front => "front",
            LegSide::Rear => "rear",
        }
    }

    pub fn other(self) -> LegSide {
        match self {
            LegSide::Front => LegSide::Rear,
            LegSide::Rear => LegSide::Front,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LegField {
    UpperLen,
    LowerLen,
    AttachFrac,
    TorqueLimit,
    HipLo,
    HipHi,
    KneeLo,
    KneeHi,
}

impl LegField {
    pub const ALL: [LegField; 8] = [
        LegField::UpperLen,
        LegField::LowerLen,
        LegField::AttachFrac,
        LegField::TorqueLimit,
        LegField::HipLo,
        LegField::HipHi,
        LegField::KneeLo,
        LegField::KneeHi,
    ];

    /// Attribute name used in paths and in the XML schema.
    pub fn name(self) -> &'static str {
        match self {
            LegField::UpperLen => "upper_len",
            LegField::LowerLen => "lower_len",
            LegField::AttachFrac => "attach_frac",
            LegField::TorqueLimit => "torque_limit",
            LegField::HipLo => "hip_lo",
            LegField::HipHi => "hip_hi",
            LegField::KneeLo => "knee_lo",
            LegField::KneeHi => "knee_hi",
        }
    }
}

/// Identifies one scalar of [`DesignParams`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ParamId {
    TorsoLength,
    TorsoHeight,
    TorsoDensity,
    Leg(LegSide, LegField),
}

/// Number of scalar design parameters.
pub const PARAM_COUNT: usize = 3 + 2 * 8;

impl ParamId {
    pub fn all() -> impl Iterator<Item = ParamId> {
        [
            ParamId::TorsoLength,
            ParamId::TorsoHeight,
            ParamId::TorsoDensity,
        ]
        .into_iter()
        .chain(
            LegSide::ALL
                .into_iter()
                .flat_map(|s| LegField::ALL.into_iter().map(move |f| ParamId::Leg(s, f))),
        )
    }

    pub fn index(self) -> usize {
        match self {
            ParamId::TorsoLength => 0,
            ParamId::TorsoHeight => 1,
            ParamId::TorsoDensity => 2,
            ParamId::Leg(side, field) => {
                let base = match side {
                    LegSide::Front => 3,
                    LegSide::Rear => 11,
                };
                base + LegField::ALL.iter().position(|f| *f == field).unwrap()
            }
        }
    }

    /// Canonical dotted path, e.g. `front.upper_len`.
    pub fn path(self) -> String {
        match self {
            ParamId::TorsoLength => "torso_length".into(),
            ParamId::TorsoHeight => "torso_height".into(),
            ParamId::TorsoDensity => "torso_density".into(),
            ParamId::Leg(side, field) => format!("{}.{}", side.name(), field.name()),
        }
    }

    /// Resolves a parameter path. A bare leg field (`upper_len`) addresses
    /// both legs.
    pub fn resolve(path: &str) -> Result<Vec<ParamId>, DesignError> {
        let path = path.trim();
        if let Some(id) = ParamId::all().find(|p| p.path() == path) {
            return Ok(vec![id]);
        }
        if let Some(field) = LegField::ALL.iter().find(|f| f.name() == path) {
            return Ok(LegSide::ALL
                .iter()
                .map(|s| ParamId::Leg(*s, *field))
                .collect());
        }
        Err(DesignError::UnknownParameter(path.to_string()))
    }
}

impl fmt::Display for ParamId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.path())
    }
}

/// Closed angular interval of a revolute joint, radians relative to the rest pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointRange {
    pub lo: f64,
    pub hi: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LegParams {
    pub upper_len: f64,
    pub lower_len: f64,
    /// Hip position along the torso, 0 = rear end, 1 = front end.
    pub attach_frac: f64,
    pub torque_limit: f64,
    pub hip_range: JointRange,
    pub knee_range: JointRange,
}

impl LegParams {
    pub fn length(&self) -> f64 {
        self.upper_len + self.lower_len
    }

    fn get(&self, field: LegField) -> f64 {
        match field {
            LegField::UpperLen => self.upper_len,
            LegField::LowerLen => self.lower_len,
            LegField::AttachFrac => self.attach_frac,
            LegField::TorqueLimit => self.torque_limit,
            LegField::HipLo => self.hip_range.lo,
            LegField::HipHi => self.hip_range.hi,
            LegField::KneeLo => self.knee_range.lo,
            LegField::KneeHi => self.knee_range.hi,
        }
    }

    fn field_mut(&mut self, field: LegField) -> &mut f64 {
        match field {
            LegField::UpperLen => &mut self.upper_len,
            LegField::LowerLen => &mut self.lower_len,
            LegField::AttachFrac => &mut self.attach_frac,
            LegField::TorqueLimit => &mut self.torque_limit,
            LegField::HipLo => &mut self.hip_range.lo,
            LegField::HipHi => &mut self.hip_range.hi,
            LegField::KneeLo => &mut self.knee_range.lo,
            LegField::KneeHi => &mut self.knee_range.hi,
        }
    }
}

/// The morphology vector: torso geometry plus two leg assemblies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignParams {
    pub torso_length: f64,
    pub torso_height: f64,
    /// Planar areal density, kg/m^2. Shared by every link.
    pub torso_density: f64,
    pub front: LegParams,
    pub rear: LegParams,
}

impl DesignParams {
    pub fn leg(&self, side: LegSide) -> &LegParams {
        match side {
            LegSide::Front => &self.front,
            LegSide::Rear => &self.rear,
        }
    }

    pub fn leg_mut(&mut self, side: LegSide) -> &mut LegParams {
        match side {
            LegSide::Front => &mut self.front,
            LegSide::Rear => &mut self.rear,
        }
    }

    pub fn get(&self, id: ParamId) -> f64 {
        match id {
            ParamId::TorsoLength => self.torso_length,
            ParamId::TorsoHeight => self.torso_height,
            ParamId::TorsoDensity => self.torso_density,
            ParamId::Leg(side, field) => self.leg(side).get(field),
        }
    }

    pub fn set(&mut self, id: ParamId, value: f64) {
        match id {
            ParamId::TorsoLength => self.torso_length = value,
            ParamId::TorsoHeight => self.torso_height = value,
            ParamId::TorsoDensity => self.torso_density = value,
            ParamId::Leg(side, field) => *self.leg_mut(side).field_mut(field) = value,
        }
    }

    /// Parameters whose values differ from `other`, in canonical order.
    pub fn changed_params(&self, other: &DesignParams) -> Vec<ParamId> {
        ParamId::all()
            .filter(|p| self.get(*p) != other.get(*p))
            .collect()
    }
}

/// The baseline quadruped every run starts from unless configured otherwise.
pub fn default_design() -> DesignParams {
    let leg = |attach_frac| LegParams {
        upper_len: 0.25,
        lower_len: 0.25,
        attach_frac,
        torque_limit: 3.0,
        hip_range: JointRange { lo: -1.0, hi: 1.0 },
        knee_range: JointRange { lo: -1.2, hi: 1.2 },
    };
    DesignParams {
        torso_length: 0.5,
        torso_height: 0.1,
        torso_density: 20.0,
        front: leg(0.9),
        rear: leg(0.1),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub const fn new(lo: f64, hi: f64) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo && v <= self.hi
    }

    pub fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }
}

/// Per-parameter admissible intervals and the per-edit step limit.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignBounds {
    intervals: [Interval; PARAM_COUNT],
    pub max_edit_frac: f64,
}

impl Default for DesignBounds {
    fn default() -> Self {
        let mut intervals = [Interval::new(0.0, 1.0); PARAM_COUNT];
        for id in ParamId::all() {
            intervals[id.index()] = match id {
                ParamId::TorsoLength => Interval::new(0.2, 1.0),
                ParamId::TorsoHeight => Interval::new(0.04, 0.3),
                ParamId::TorsoDensity => Interval::new(10.0, 200.0),
                ParamId::Leg(_, field) => match field {
                    LegField::UpperLen | LegField::LowerLen => Interval::new(0.05, 0.6),
                    LegField::AttachFrac => Interval::new(0.0, 1.0),
                    LegField::TorqueLimit => Interval::new(0.5, 10.0),
                    LegField::HipLo => Interval::new(-1.6, 0.0),
                    LegField::HipHi => Interval::new(0.0, 1.6),
                    LegField::KneeLo => Interval::new(-2.4, 0.0),
                    LegField::KneeHi => Interval::new(0.0, 2.4),
                },
            };
        }
        Self {
            intervals,
            max_edit_frac: 0.3,
        }
    }
}

impl DesignBounds {
    pub fn interval(&self, id: ParamId) -> Interval {
        self.intervals[id.index()]
    }

    /// Replaces one interval. Panics if `lo >= hi`.
    pub fn set_interval(&mut self, id: ParamId, interval: Interval) {
        assert!(interval.lo < interval.hi, "empty interval for {id}");
        self.intervals[id.index()] = interval;
    }
}

/// Result of [`validate_design`]: empty means the design is valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DesignReport {
    pub violations: Vec<String>,
}

impl DesignReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

pub fn validate_design(d: &DesignParams, b: &DesignBounds) -> DesignReport {
    let mut violations = Vec::new();
    for id in ParamId::all() {
        let v = d.get(id);
        let iv = b.interval(id);
        if !v.is_finite() {
            violations.push(format!("{id} is not finite"));
        } else if v < iv.lo {
            violations.push(format!("{id} below lo ({v} < {})", iv.lo));
        } else if v > iv.hi {
            violations.push(format!("{id} above hi ({v} > {})", iv.hi));
        }
    }
    for side in LegSide::ALL {
        let leg = d.leg(side);
        if leg.hip_range.lo >= leg.hip_range.hi {
            violations.push(format!("{}.hip: empty joint range", side.name()));
        }
        if leg.knee_range.lo >= leg.knee_range.hi {
            violations.push(format!("{}.knee: empty joint range", side.name()));
        }
        if leg.length() < d.torso_height / 2.0 {
            violations.push(format!(
                "{}: legs cannot reach the ground (upper_len + lower_len < torso_height/2)",
                side.name()
            ));
        }
    }
    DesignReport { violations }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DeltaKind {
    /// Set the parameter to the given value.
    Absolute,
    /// Scale the parameter by `1 + value`.
    Relative,
}

impl DeltaKind {
    pub fn name(self) -> &'static str {
        match self {
            DeltaKind::Absolute => "absolute",
            DeltaKind::Relative => "relative",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamChange {
    pub path: String,
    pub kind: DeltaKind,
    pub value: f64,
}

impl ParamChange {
    pub fn relative(path: impl Into<String>, value: f64) -> Self {
        Self {
            path: path.into(),
            kind: DeltaKind::Relative,
            value,
        }
    }

    pub fn absolute(path: impl Into<String>, value: f64) -> Self {
        Self {
            path: path.into(),
            kind: DeltaKind::Absolute,
            value,
        }
    }
}

/// One proposed design modification.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DesignEdit {
    pub changes: Vec<ParamChange>,
    pub rationale: String,
}

impl DesignEdit {
    pub fn identity(rationale: impl Into<String>) -> Self {
        Self {
            changes: Vec::new(),
            rationale: rationale.into(),
        }
    }

    /// Resolves every path, rejecting unknown and repeated parameters.
    pub fn resolve(&self) -> Result<Vec<(ParamId, DeltaKind, f64)>, DesignError> {
        let mut out: Vec<(ParamId, DeltaKind, f64)> = Vec::new();
        for change in &self.changes {
            for id in ParamId::resolve(&change.path)? {
                if out.iter().any(|(seen, _, _)| *seen == id) {
                    return Err(DesignError::DuplicateParameter(id.path()));
                }
                out.push((id, change.kind, change.value));
            }
        }
        Ok(out)
    }
}

/// Rounds to [`DESIGN_DIGITS`] significant digits.
pub fn quantize(v: f64) -> f64 {
    if !v.is_finite() || v == 0.0 {
        return v;
    }
    format!("{:.*e}", DESIGN_DIGITS - 1, v).parse().unwrap_or(v)
}

/// Applies `e` to `d`. Targets are clamped to their bounds, and relative
/// changes are limited to `max_edit_frac` of the old value.
pub fn apply_edit(
    d: &DesignParams,
    e: &DesignEdit,
    b: &DesignBounds,
) -> Result<DesignParams, DesignError> {
    let mut out = *d;
    for (id, kind, value) in e.resolve()? {
        let old = d.get(id);
        let target = match kind {
            DeltaKind::Absolute => value,
            DeltaKind::Relative => {
                let frac = if value.is_nan() {
                    0.0
                } else {
                    value.clamp(-b.max_edit_frac, b.max_edit_frac)
                };
                old * (1.0 + frac)
            }
        };
        if target.is_nan() {
            return Err(DesignError::InfeasibleResult(vec![format!(
                "{id}: non-numeric value"
            )]));
        }
        out.set(id, quantize(b.interval(id).clamp(target)));
    }
    let report = validate_design(&out, b);
    if report.is_ok() {
        Ok(out)
    } else {
        Err(DesignError::InfeasibleResult(report.violations))
    }
}

/// A rigid link of the simulated body, in its rest pose.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkSpec {
    pub name: &'static str,
    pub length: f64,
    pub width: f64,
    pub mass: f64,
    pub inertia: f64,
    /// World position of the link center at rest.
    pub position: [f64; 2],
    /// World orientation at rest, radians.
    pub angle: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointSpec {
    pub name: &'static str,
    pub parent: usize,
    pub child: usize,
    /// Anchor in the parent's local frame.
    pub parent_anchor: [f64; 2],
    /// Anchor in the child's local frame.
    pub child_anchor: [f64; 2],
    /// Relative angle (child minus parent) in the rest pose. Joint angles,
    /// ranges and passive springs are measured from here.
    pub rest_angle: f64,
    pub range: JointRange,
    pub torque_limit: f64,
}

/// Rigid bodies and joints derived from a design.
///
/// Link order: torso, front upper, front lower, rear upper, rear lower.
/// Joint order: front hip, front knee, rear hip, rear knee. Leg links are
/// vertical segments in their local frame, proximal end at `+length/2`;
/// at rest every leg hangs vertically.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkLayout {
    pub links: Vec<LinkSpec>,
    pub joints: Vec<JointSpec>,
    /// Foot points as (link index, local point).
    pub feet: Vec<(usize, [f64; 2])>,
    /// Torso corners in the torso frame.
    pub torso_corners: Vec<[f64; 2]>,
    /// Torso center height in the rest pose.
    pub standing_height: f64,
    /// Shortest leg (upper + lower).
    pub min_leg_length: f64,
}

impl LinkLayout {
    pub fn total_mass(&self) -> f64 {
        self.links.iter().map(|l| l.mass).sum()
    }

    pub fn torque_limits(&self) -> [f64; 4] {
        let mut out = [0.0; 4];
        for (o, j) in out.iter_mut().zip(&self.joints) {
            *o = j.torque_limit;
        }
        out
    }
}

fn rect_inertia(mass: f64, length: f64, width: f64) -> f64 {
    mass * (length * length + width * width) / 12.0
}

pub fn derive_layout(d: &DesignParams) -> LinkLayout {
    let hh = d.torso_height / 2.0;
    let hip_x = |leg: &LegParams| (leg.attach_frac - 0.5) * d.torso_length;
    let (xf, xr) = (hip_x(&d.front), hip_x(&d.rear));
    let (lf, lr) = (d.front.length(), d.rear.length());

    // Legs hang vertically at rest; unequal legs pitch the torso so that
    // both feet touch the ground where that is geometrically possible.
    let pitch = if (xf - xr).abs() > 1e-9 {
        ((lf - lr) / (xf - xr)).clamp(-0.95, 0.95).asin()
    } else {
        0.0
    };
    let (sin, cos) = pitch.sin_cos();
    let hip_world_y = |x: f64, y_c: f64| y_c + x * sin - hh * cos;
    // Torso height such that the lowest foot sits exactly on the ground.
    let torso_y = [(xf, lf), (xr, lr)]
        .iter()
        .map(|&(x, l)| l - (x * sin - hh * cos))
        .fold(f64::NEG_INFINITY, f64::max);

    let torso_mass = d.torso_density * d.torso_length * d.torso_height;
    let mut links = vec![LinkSpec {
        name: "torso",
        length: d.torso_length,
        width: d.torso_height,
        mass: torso_mass,
        inertia: rect_inertia(torso_mass, d.torso_length, d.torso_height),
        position: [0.0, torso_y],
        angle: pitch,
    }];
    let mut joints = Vec::with_capacity(4);
    let mut feet = Vec::with_capacity(2);

    for side in LegSide::ALL {
        let leg = d.leg(side);
        let x = hip_x(leg);
        let hip = [x * cos + hh * sin, hip_world_y(x, torso_y)];
        let (upper_name, lower_name, hip_name, knee_name) = match side {
            LegSide::Front => ("front_upper", "front_lower", "front_hip", "front_knee"),
            LegSide::Rear => ("rear_upper", "rear_lower", "rear_hip", "rear_knee"),
        };
        let upper_idx = links.len();
        let upper_mass = d.torso_density * leg.upper_len * LINK_THICKNESS;
        links.push(LinkSpec {
            name: upper_name,
            length: leg.upper_len,
            width: LINK_THICKNESS,
            mass: upper_mass,
            inertia: rect_inertia(upper_mass, leg.upper_len, LINK_THICKNESS),
            position: [hip[0], hip[1] - leg.upper_len / 2.0],
            angle: 0.0,
        });
        let lower_idx = links.len();
        let lower_mass = d.torso_density * leg.lower_len * LINK_THICKNESS;
        links.push(LinkSpec {
            name: lower_name,
            length: leg.lower_len,
            width: LINK_THICKNESS,
            mass: lower_mass,
            inertia: rect_inertia(lower_mass, leg.lower_len, LINK_THICKNESS),
            position: [hip[0], hip[1] - leg.upper_len - leg.lower_len / 2.0],
            angle: 0.0,
        });
        joints.push(JointSpec {
            name: hip_name,
            parent: 0,
            child: upper_idx,
            parent_anchor: [x, -hh],
            child_anchor: [0.0, leg.upper_len / 2.0],
            rest_angle: -pitch,
            range: leg.hip_range,
            torque_limit: leg.torque_limit,
        });
        joints.push(JointSpec {
            name: knee_name,
            parent: upper_idx,
            child: lower_idx,
            parent_anchor: [0.0, -leg.upper_len / 2.0],
            child_anchor: [0.0, leg.lower_len / 2.0],
            rest_angle: 0.0,
            range: leg.knee_range,
            torque_limit: leg.torque_limit,
        });
        feet.push((lower_idx, [0.0, -leg.lower_len / 2.0]));
    }

    let hl = d.torso_length / 2.0;
    LinkLayout {
        links,
        joints,
        feet,
        torso_corners: vec![[-hl, -hh], [hl, -hh], [hl, hh], [-hl, hh]],
        standing_height: torso_y,
        min_leg_length: lf.min(lr),
    }
}

fn fmt_num(v: f64) -> String {
    // Shortest representation that parses back to the same value; designs
    // produced by `apply_edit` carry at most DESIGN_DIGITS significant digits.
    format!("{v}")
}

/// Emits the `<robot version="1">` XML form of a design.
pub fn serialize_design(d: &DesignParams) -> String {
    let mut s = String::from("<robot version=\"1\">");
    s.push_str(&format!(
        "<torso length=\"{}\" height=\"{}\" density=\"{}\"/>",
        fmt_num(d.torso_length),
        fmt_num(d.torso_height),
        fmt_num(d.torso_density)
    ));
    for side in LegSide::ALL {
        let l = d.leg(side);
        s.push_str(&format!(
            "<leg id=\"{}\" attach_frac=\"{}\" upper_len=\"{}\" lower_len=\"{}\" torque_limit=\"{}\" hip_lo=\"{}\" hip_hi=\"{}\" knee_lo=\"{}\" knee_hi=\"{}\"/>",
            side.name(),
            fmt_num(l.attach_frac),
            fmt_num(l.upper_len),
            fmt_num(l.lower_len),
            fmt_num(l.torque_limit),
            fmt_num(l.hip_range.lo),
            fmt_num(l.hip_range.hi),
            fmt_num(l.knee_range.lo),
            fmt_num(l.knee_range.hi),
        ));
    }
    s.push_str("</robot>");
    s
}

/// Parses the XML form, checking every value against default bounds.
pub fn parse_design(text: &str) -> Result<DesignParams, DesignError> {
    parse_design_with_bounds(text, &DesignBounds::default())
}

pub fn parse_design_with_bounds(
    text: &str,
    bounds: &DesignBounds,
) -> Result<DesignParams, DesignError> {
    let doc =
        roxmltree::Document::parse(text).map_err(|e| DesignError::MalformedXml(e.to_string()))?;
    let root = doc.root_element();
    if root.tag_name().name() != "robot" {
        return Err(DesignError::MalformedXml(format!(
            "expected <robot>, found <{}>",
            root.tag_name().name()
        )));
    }
    if root.attribute("version") != Some("1") {
        return Err(DesignError::MalformedXml(
            "unsupported or missing robot version".into(),
        ));
    }

    let attr = |node: roxmltree::Node, name: &str, path: String| -> Result<f64, DesignError> {
        let raw = node
            .attribute(name)
            .ok_or_else(|| DesignError::MissingField(path.clone()))?;
        raw.trim()
            .parse::<f64>()
            .map_err(|_| DesignError::MalformedXml(format!("`{path}` is not a number: {raw:?}")))
    };

    let torso = root
        .children()
        .find(|n| n.has_tag_name("torso"))
        .ok_or_else(|| DesignError::MissingField("torso".into()))?;
    let mut d = default_design();
    d.torso_length = attr(torso, "length", "torso_length".into())?;
    d.torso_height = attr(torso, "height", "torso_height".into())?;
    d.torso_density = attr(torso, "density", "torso_density".into())?;

    for side in LegSide::ALL {
        let leg = root
            .children()
            .find(|n| n.has_tag_name("leg") && n.attribute("id") == Some(side.name()))
            .ok_or_else(|| DesignError::MissingField(format!("leg[{}]", side.name())))?;
        for field in LegField::ALL {
            let id = ParamId::Leg(side, field);
            let v = attr(leg, field.name(), id.path())?;
            d.set(id, v);
        }
    }

    for id in ParamId::all() {
        let v = d.get(id);
        let iv = bounds.interval(id);
        if !iv.contains(v) {
            return Err(DesignError::OutOfBounds {
                field: id.path(),
                value: v,
                lo: iv.lo,
                hi: iv.hi,
            });
        }
    }
    let report = validate_design(&d, bounds);
    if !report.is_ok() {
        return Err(DesignError::InfeasibleResult(report.violations));
    }
    Ok(d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_is_valid() {
        let d = default_design();
        assert!(validate_design(&d, &DesignBounds::default()).is_ok());
        assert_eq!(d.torso_length, 0.5);
        assert_eq!(d.front.upper_len, 0.25);
        assert_eq!(d.front.attach_frac, 0.9);
        assert_eq!(d.rear.attach_frac, 0.1);
        assert_eq!(d.rear.torque_limit, 3.0);
    }

    #[test]
    fn zero_upper_len_is_reported() {
        let mut d = default_design();
        d.front.upper_len = 0.0;
        let r = validate_design(&d, &DesignBounds::default());
        assert!(r
            .violations
            .iter()
            .any(|v| v.contains("upper_len below lo")));
    }

    #[test]
    fn empty_hip_range_is_reported() {
        let mut d = default_design();
        d.rear.hip_range = JointRange { lo: 0.5, hi: 0.5 };
        let r = validate_design(&d, &DesignBounds::default());
        assert!(r.violations.iter().any(|v| v.contains("empty joint range")));
    }

    #[test]
    fn relative_edit_arithmetic() {
        let b = DesignBounds::default();
        let e = DesignEdit {
            changes: vec![ParamChange::relative("front.upper_len", 0.10)],
            rationale: String::new(),
        };
        let out = apply_edit(&default_design(), &e, &b).unwrap();
        assert_eq!(out.front.upper_len, 0.275);
        assert_eq!(out.rear.upper_len, 0.25);
    }

    #[test]
    fn relative_edit_is_step_limited() {
        let b = DesignBounds::default();
        let e = DesignEdit {
            changes: vec![ParamChange::relative("upper_len", 5.0)],
            rationale: String::new(),
        };
        let out = apply_edit(&default_design(), &e, &b).unwrap();
        assert_eq!(out.front.upper_len, 0.325);
        assert_eq!(out.rear.upper_len, 0.325);
    }

    #[test]
    fn absolute_edit_clamps_to_bounds() {
        let b = DesignBounds::default();
        let e = DesignEdit {
            changes: vec![ParamChange::absolute("torso_length", 10.0)],
            rationale: String::new(),
        };
        assert_eq!(
            apply_edit(&default_design(), &e, &b).unwrap().torso_length,
            1.0
        );
    }

    #[test]
    fn unknown_and_duplicate_paths() {
        let b = DesignBounds::default();
        let e = DesignEdit {
            changes: vec![ParamChange::relative("tail_len", 0.1)],
            rationale: String::new(),
        };
        assert!(matches!(
            apply_edit(&default_design(), &e, &b),
            Err(DesignError::UnknownParameter(_))
        ));
        let e = DesignEdit {
            changes: vec![
                ParamChange::relative("upper_len", 0.1),
                ParamChange::relative("front.upper_len", 0.1),
            ],
            rationale: String::new(),
        };
        assert!(matches!(
            apply_edit(&default_design(), &e, &b),
            Err(DesignError::DuplicateParameter(_))
        ));
    }

    #[test]
    fn infeasible_edit_is_rejected() {
        let mut b = DesignBounds::default();
        b.max_edit_frac = 1.0;
        let mut d = default_design();
        d.torso_height = 0.3;
        d.front.upper_len = 0.08;
        d.front.lower_len = 0.08;
        let e = DesignEdit {
            changes: vec![ParamChange::absolute("front.upper_len", 0.05)],
            rationale: String::new(),
        };
        assert!(matches!(
            apply_edit(&d, &e, &b),
            Err(DesignError::InfeasibleResult(_))
        ));
    }

    #[test]
    fn layout_counts_and_masses() {
        let d = default_design();
        let l = derive_layout(&d);
        assert_eq!(l.links.len(), 5);
        assert_eq!(l.joints.len(), 4);
        assert_eq!(
            l.links[0].mass,
            d.torso_density * d.torso_length * d.torso_height
        );
        let mut d2 = d;
        d2.front.upper_len *= 2.0;
        d2.rear.upper_len *= 2.0;
        let l2 = derive_layout(&d2);
        assert!((l2.links[1].mass - 2.0 * l.links[1].mass).abs() < 1e-15);
        assert!(l.links.iter().all(|k| k.mass > 0.0 && k.inertia > 0.0));
    }

    #[test]
    fn joint_anchors_coincide_at_rest() {
        let mut d = default_design();
        d.front.lower_len = 0.2;
        d.rear.attach_frac = 0.3;
        let l = derive_layout(&d);
        let world = |k: &LinkSpec, a: [f64; 2]| {
            let (s, c) = k.angle.sin_cos();
            [
                k.position[0] + c * a[0] - s * a[1],
                k.position[1] + s * a[0] + c * a[1],
            ]
        };
        for j in &l.joints {
            let p = &l.links[j.parent];
            let c = &l.links[j.child];
            let pa = world(p, j.parent_anchor);
            let ca = world(c, j.child_anchor);
            assert!((pa[0] - ca[0]).abs() < 1e-12 && (pa[1] - ca[1]).abs() < 1e-12);
            // anchors lie on the parent link
            assert!(j.parent_anchor[0].abs() <= p.length / 2.0 + 1e-12);
        }
        for (link, local) in &l.feet {
            let k = &l.links[*link];
            assert!(world(k, *local)[1].abs() < 1e-12);
        }
        assert!(
            l.links[0].angle < 0.0,
            "shorter front leg tips the torso forward"
        );
    }

    #[test]
    fn xml_round_trip_and_errors() {
        let d = default_design();
        let xml = serialize_design(&d);
        assert!(xml.starts_with("<robot version=\"1\"><torso length=\"0.5\""));
        assert_eq!(parse_design(&xml).unwrap(), d);

        let no_torso = xml.replace("<torso length=\"0.5\" height=\"0.1\" density=\"20\"/>", "");
        assert!(matches!(
            parse_design(&no_torso),
            Err(DesignError::MissingField(f)) if f == "torso"
        ));
        let neg = xml.replacen("upper_len=\"0.25\"", "upper_len=\"-1\"", 1);
        assert!(matches!(
            parse_design(&neg),
            Err(DesignError::OutOfBounds { .. })
        ));
        assert!(matches!(
            parse_design("<robot"),
            Err(DesignError::MalformedXml(_))
        ));
    }

    #[test]
    fn quantize_keeps_nine_digits() {
        assert_eq!(quantize(0.25 * 1.1), 0.275);
        assert_eq!(quantize(1.0 / 3.0), 0.333333333);
    }
}

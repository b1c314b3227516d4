//! Procedural 32x32 avatars with exact head and hair masks.
//!
//! Every avatar is a gray background, a clothing-colored torso, a skin-colored
//! head disc with hair-colored brows and an optional hair region. Geometry is
//! integer-only so renders are byte-identical everywhere.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{BinaryMask, PixelGrid};

pub const SIZE: usize = 32;
pub const HEAD_RADIUS: i64 = 6;
pub const HEAD_ROW: i64 = 10;
const HEAD_COL: i64 = 16;
const TILT_SHIFT: i64 = 4;
/// Outer radius of the hair cap arc.
const CAP_RADIUS: i64 = 11;
/// Long hair hangs this many rows below the disc bottom.
const LONG_HAIR_DROP: i64 = 8;
/// Horizontal offsets (from the head center) covered by each long-hair column.
const LONG_HAIR_OFFSETS: std::ops::RangeInclusive<i64> = 7..=13;
const BROW_ROW_OFFSET: i64 = -2;
const TORSO_TOP: usize = 17;
const TORSO_LEFT: usize = 6;
const TORSO_RIGHT: usize = 25;

pub const BACKGROUND: [f64; 3] = [0.8, 0.8, 0.8];
pub const SKIN_PALETTE: [[f64; 3]; 3] =
    [[0.98, 0.84, 0.75], [0.90, 0.66, 0.44], [0.72, 0.48, 0.13]];
pub const HAIR_PALETTE: [[f64; 3]; 3] =
    [[0.08, 0.06, 0.06], [0.40, 0.20, 0.05], [0.78, 0.10, 0.08]];
pub const CLOTHING_PALETTE: [[f64; 3]; 4] = [
    [0.15, 0.30, 0.85],
    [0.20, 0.70, 0.25],
    [0.55, 0.20, 0.60],
    [0.95, 0.55, 0.05],
];

pub const NUM_SKIN: usize = SKIN_PALETTE.len();
pub const NUM_STYLES: usize = 3;
pub const NUM_HAIR: usize = HAIR_PALETTE.len();
pub const NUM_CLOTHING: usize = CLOTHING_PALETTE.len();
pub const NUM_TILTS: usize = 3;
pub const NUM_SPECS: usize = NUM_SKIN * NUM_STYLES * NUM_HAIR * NUM_CLOTHING * NUM_TILTS;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HairStyle {
    Bald,
    Short,
    Long,
}

impl HairStyle {
    pub const ALL: [HairStyle; 3] = [HairStyle::Bald, HairStyle::Short, HairStyle::Long];

    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(i: i64) -> Option<Self> {
        Self::ALL.get(usize::try_from(i).ok()?).copied()
    }
}

/// Discrete avatar attributes. `head_tilt` is the horizontal head offset in
/// `{-1, 0, 1}` and plays the role of body pose.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "[i64; 5]", try_from = "[i64; 5]")]
pub struct AttributeSpec {
    pub skin_tone: u8,
    pub hair_style: HairStyle,
    pub hair_color: u8,
    pub clothing_color: u8,
    pub head_tilt: i8,
}

impl AttributeSpec {
    pub const FIELDS: [&'static str; 5] = [
        "skin_tone",
        "hair_style",
        "hair_color",
        "clothing_color",
        "head_tilt",
    ];

    /// Builds a spec from its five integers, naming the first out-of-range field.
    pub fn from_values(v: [i64; 5]) -> Result<Self> {
        let check = |i: usize, lo: i64, hi: i64| -> Result<i64> {
            if (lo..=hi).contains(&v[i]) {
                Ok(v[i])
            } else {
                Err(Error::invalid(
                    Self::FIELDS[i],
                    format!("{} is outside {lo}..={hi}", v[i]),
                ))
            }
        };
        Ok(Self {
            skin_tone: check(0, 0, NUM_SKIN as i64 - 1)? as u8,
            hair_style: HairStyle::from_index(check(1, 0, NUM_STYLES as i64 - 1)?).unwrap(),
            hair_color: check(2, 0, NUM_HAIR as i64 - 1)? as u8,
            clothing_color: check(3, 0, NUM_CLOTHING as i64 - 1)? as u8,
            head_tilt: check(4, -1, 1)? as i8,
        })
    }

    pub fn values(&self) -> [i64; 5] {
        [
            i64::from(self.skin_tone),
            i64::from(self.hair_style.index()),
            i64::from(self.hair_color),
            i64::from(self.clothing_color),
            i64::from(self.head_tilt),
        ]
    }

    /// Position in the lexicographic enumeration of all specs.
    pub fn index(&self) -> usize {
        let v = self.values();
        (((v[0] as usize * NUM_STYLES + v[1] as usize) * NUM_HAIR + v[2] as usize) * NUM_CLOTHING
            + v[3] as usize)
            * NUM_TILTS
            + (v[4] + 1) as usize
    }

    pub fn from_index(mut i: usize) -> Option<Self> {
        if i >= NUM_SPECS {
            return None;
        }
        let tilt = (i % NUM_TILTS) as i64 - 1;
        i /= NUM_TILTS;
        let clothing = (i % NUM_CLOTHING) as i64;
        i /= NUM_CLOTHING;
        let color = (i % NUM_HAIR) as i64;
        i /= NUM_HAIR;
        let style = (i % NUM_STYLES) as i64;
        let skin = (i / NUM_STYLES) as i64;
        Self::from_values([skin, style, color, clothing, tilt]).ok()
    }

    /// All specs in lexicographic order.
    pub fn all() -> impl Iterator<Item = AttributeSpec> {
        (0..NUM_SPECS).map(|i| Self::from_index(i).unwrap())
    }

    pub fn head_center(&self) -> (i64, i64) {
        (HEAD_ROW, HEAD_COL + TILT_SHIFT * i64::from(self.head_tilt))
    }
}

impl From<AttributeSpec> for [i64; 5] {
    fn from(a: AttributeSpec) -> Self {
        a.values()
    }
}

impl TryFrom<[i64; 5]> for AttributeSpec {
    type Error = Error;

    fn try_from(v: [i64; 5]) -> Result<Self> {
        Self::from_values(v)
    }
}

impl std::str::FromStr for AttributeSpec {
    type Err = Error;

    /// Parses `skin,style,hair,clothing,tilt`, e.g. `1,2,0,3,-1`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 5 {
            return Err(Error::invalid(
                "attributes",
                format!("expected 5 comma-separated integers, got {}", parts.len()),
            ));
        }
        let mut v = [0i64; 5];
        for (i, p) in parts.iter().enumerate() {
            v[i] = p
                .parse()
                .map_err(|_| Error::invalid(Self::FIELDS[i], format!("`{p}` is not an integer")))?;
        }
        Self::from_values(v)
    }
}

impl fmt::Display for AttributeSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let v = self.values();
        write!(f, "{},{},{},{},{}", v[0], v[1], v[2], v[3], v[4])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AvatarRender {
    pub image: PixelGrid,
    pub head_mask: BinaryMask,
    pub hair_mask: BinaryMask,
    pub attrs: AttributeSpec,
}

impl AvatarRender {
    pub fn head_and_hair(&self) -> BinaryMask {
        self.head_mask.union(&self.hair_mask).expect("same dims")
    }
}

pub(crate) fn in_disc(row: i64, col: i64, center: (i64, i64)) -> bool {
    let (dr, dc) = (row - center.0, col - center.1);
    dr * dr + dc * dc <= HEAD_RADIUS * HEAD_RADIUS
}

/// Brows sit inside the disc so that hair color stays visible on bald heads.
/// They are painted halfway between skin and hair.
pub(crate) fn is_brow(row: i64, col: i64, center: (i64, i64)) -> bool {
    row - center.0 == BROW_ROW_OFFSET && (2..=3).contains(&(col - center.1).abs())
}

pub(crate) fn brow_color(skin: [f64; 3], hair: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| 0.5 * (skin[i] + hair[i]))
}

fn is_hair(style: HairStyle, row: i64, col: i64, center: (i64, i64)) -> bool {
    let (dr, dc) = (row - center.0, col - center.1);
    let d2 = dr * dr + dc * dc;
    let cap = dr < 0 && d2 > HEAD_RADIUS * HEAD_RADIUS && d2 <= CAP_RADIUS * CAP_RADIUS;
    match style {
        HairStyle::Bald => false,
        HairStyle::Short => cap,
        HairStyle::Long => {
            cap || (LONG_HAIR_OFFSETS.contains(&dc.abs())
                && (0..=HEAD_RADIUS + LONG_HAIR_DROP).contains(&dr))
        }
    }
}

/// Renders one avatar. The head mask marks the whole disc (skin and brows) and
/// the hair mask marks the hair painted outside it.
pub fn render_avatar(attrs: AttributeSpec) -> AvatarRender {
    let center = attrs.head_center();
    let skin = SKIN_PALETTE[attrs.skin_tone as usize];
    let hair = HAIR_PALETTE[attrs.hair_color as usize];
    let clothing = CLOTHING_PALETTE[attrs.clothing_color as usize];

    let mut image = PixelGrid::zeros(SIZE, SIZE, 3);
    let mut head_mask = BinaryMask::empty(SIZE, SIZE);
    let mut hair_mask = BinaryMask::empty(SIZE, SIZE);
    for r in 0..SIZE {
        for c in 0..SIZE {
            let (ri, ci) = (r as i64, c as i64);
            let color = if in_disc(ri, ci, center) {
                head_mask.set(r, c, true);
                if is_brow(ri, ci, center) {
                    brow_color(skin, hair)
                } else {
                    skin
                }
            } else if is_hair(attrs.hair_style, ri, ci, center) {
                hair_mask.set(r, c, true);
                hair
            } else if r >= TORSO_TOP && (TORSO_LEFT..=TORSO_RIGHT).contains(&c) {
                clothing
            } else {
                BACKGROUND
            };
            image.set_pixel(r, c, &color);
        }
    }
    AvatarRender {
        image,
        head_mask,
        hair_mask,
        attrs,
    }
}

/// Renders every attribute combination in lexicographic order.
pub fn enumerate_dataset() -> Vec<AvatarRender> {
    AttributeSpec::all().map(render_avatar).collect()
}

/// A partial attribute constraint. The empty condition matches everything.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
pub struct Condition {
    pub skin_tone: Option<u8>,
    pub hair_style: Option<HairStyle>,
    pub hair_color: Option<u8>,
    pub clothing_color: Option<u8>,
    pub head_tilt: Option<i8>,
}

impl Condition {
    pub fn null() -> Self {
        Self::default()
    }

    pub fn exact(a: AttributeSpec) -> Self {
        Self {
            skin_tone: Some(a.skin_tone),
            hair_style: Some(a.hair_style),
            hair_color: Some(a.hair_color),
            clothing_color: Some(a.clothing_color),
            head_tilt: Some(a.head_tilt),
        }
    }

    pub fn is_null(&self) -> bool {
        *self == Self::default()
    }

    /// Number of specs in the full product space that satisfy this condition.
    pub fn match_count(&self) -> usize {
        let free = |set: bool, n: usize| if set { 1 } else { n };
        free(self.skin_tone.is_some(), NUM_SKIN)
            * free(self.hair_style.is_some(), NUM_STYLES)
            * free(self.hair_color.is_some(), NUM_HAIR)
            * free(self.clothing_color.is_some(), NUM_CLOTHING)
            * free(self.head_tilt.is_some(), NUM_TILTS)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let fmt_opt = |v: Option<i64>| v.map_or("*".to_string(), |x| x.to_string());
        write!(
            f,
            "[{},{},{},{},{}]",
            fmt_opt(self.skin_tone.map(i64::from)),
            fmt_opt(self.hair_style.map(|s| i64::from(s.index()))),
            fmt_opt(self.hair_color.map(i64::from)),
            fmt_opt(self.clothing_color.map(i64::from)),
            fmt_opt(self.head_tilt.map(i64::from)),
        )
    }
}

pub fn condition_match(cond: &Condition, attrs: &AttributeSpec) -> bool {
    fn ok<T: PartialEq>(c: Option<T>, v: T) -> bool {
        c.is_none_or(|c| c == v)
    }
    ok(cond.skin_tone, attrs.skin_tone)
        && ok(cond.hair_style, attrs.hair_style)
        && ok(cond.hair_color, attrs.hair_color)
        && ok(cond.clothing_color, attrs.clothing_color)
        && ok(cond.head_tilt, attrs.head_tilt)
}

/// Spec of the ideal swap: head identity and hair from `head`, clothing and pose from `body`.
pub fn swap_spec(body: AttributeSpec, head: AttributeSpec) -> AttributeSpec {
    AttributeSpec {
        skin_tone: head.skin_tone,
        hair_style: head.hair_style,
        hair_color: head.hair_color,
        clothing_color: body.clothing_color,
        head_tilt: body.head_tilt,
    }
}

pub fn oracle_swap(body: AttributeSpec, head: AttributeSpec) -> AvatarRender {
    render_avatar(swap_spec(body, head))
}

/// Pixels that a perfect swap must be free to change: head and hair of the body
/// render together with head and hair of the oracle render.
pub fn ground_truth_edit_mask(body: AttributeSpec, head: AttributeSpec) -> BinaryMask {
    let before = render_avatar(body).head_and_hair();
    let after = oracle_swap(body, head).head_and_hair();
    before.union(&after).expect("same dims")
}

/// Rows strictly below the bottom of the head disc.
pub fn below_disc(row: usize) -> bool {
    row as i64 > HEAD_ROW + HEAD_RADIUS
}

//! Keyword vocabularies used to interpret `to`/`from` attributes.

use serde::{Deserialize, Serialize};

/// Unit vector in a y-up mathematical frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DirectionVector {
    pub dx: f64,
    pub dy: f64,
}

impl DirectionVector {
    /// Normalizes `(dx, dy)`; `None` for the zero vector.
    pub fn new(dx: f64, dy: f64) -> Option<Self> {
        let n = dx.hypot(dy);
        (n > 0.0 && n.is_finite()).then(|| Self { dx: dx / n, dy: dy / n })
    }

    /// Converts a displacement in pixel coordinates (y down) to the y-up frame.
    pub fn from_pixel_delta(dx: f64, dy: f64) -> Option<Self> {
        Self::new(dx, -dy)
    }
}

const FILLERS: &[&str] = &["to", "the", "of", "on", "at", "in", "a", "an", "side"];

const DIRECTIONS: &[(&str, (f64, f64))] = &[
    ("left", (-1.0, 0.0)),
    ("right", (1.0, 0.0)),
    ("above", (0.0, 1.0)),
    ("over", (0.0, 1.0)),
    ("on top of", (0.0, 1.0)),
    ("below", (0.0, -1.0)),
    ("under", (0.0, -1.0)),
    ("top left", (-1.0, 1.0)),
    ("top right", (1.0, 1.0)),
    ("bottom left", (-1.0, -1.0)),
    ("bottom right", (1.0, -1.0)),
];

pub(crate) fn tokens(s: &str) -> Vec<String> {
    s.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

/// Longest direction phrase in `tokens`: `(start, len, vector)`. Ties go to
/// the earliest occurrence.
fn find_direction(toks: &[String]) -> Option<(usize, usize, (f64, f64))> {
    let mut best: Option<(usize, usize, (f64, f64))> = None;
    for &(phrase, v) in DIRECTIONS {
        let p: Vec<&str> = phrase.split(' ').collect();
        if p.len() > toks.len() {
            continue;
        }
        for start in 0..=toks.len() - p.len() {
            if toks[start..start + p.len()].iter().zip(&p).all(|(a, b)| a == b) {
                let better = match best {
                    None => true,
                    Some((bs, bl, _)) => p.len() > bl || (p.len() == bl && start < bs),
                };
                if better {
                    best = Some((start, p.len(), v));
                }
                break;
            }
        }
    }
    best
}

/// Unit vector for an exact direction phrase such as `"on top of"` or
/// `"top right"`.
pub fn direction_unit_vector(keyword: &str) -> Option<DirectionVector> {
    let toks = tokens(keyword);
    let (start, len, (dx, dy)) = find_direction(&toks)?;
    (start == 0 && len == toks.len()).then(|| DirectionVector::new(dx, dy).expect("nonzero"))
}

/// Splits a positional-addition target like `"bag on top of"` into the
/// object label (`"bag"`) and the intended direction.
pub fn split_positional_target(to: &str) -> Option<(String, DirectionVector)> {
    let toks = tokens(to);
    let (start, len, (dx, dy)) = find_direction(&toks)?;
    let is_filler = |t: &String| FILLERS.contains(&t.as_str());
    let mut before: Vec<&String> = toks[..start].iter().collect();
    while before.last().is_some_and(|t| is_filler(t)) {
        before.pop();
    }
    let object: Vec<&String> = if before.is_empty() {
        toks[start + len..].iter().skip_while(|t| is_filler(t)).collect()
    } else {
        before
    };
    let object = object.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(" ");
    Some((object, DirectionVector::new(dx, dy).expect("nonzero")))
}

/// Absolute image region named in a position-replacement edit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImagePosition {
    Left,
    Center,
    Right,
    Top,
    Bottom,
}

impl ImagePosition {
    pub fn parse(s: &str) -> Option<Self> {
        let mut found: Option<ImagePosition> = None;
        for t in tokens(s) {
            let p = match t.as_str() {
                "left" => ImagePosition::Left,
                "right" => ImagePosition::Right,
                "top" | "upper" => ImagePosition::Top,
                "bottom" | "lower" => ImagePosition::Bottom,
                "center" | "centre" | "middle" => ImagePosition::Center,
                _ => continue,
            };
            match found {
                Some(prev) if prev != p => return None,
                _ => found = Some(p),
            }
        }
        found
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Horizontal,
    Vertical,
}

/// What a position-replacement edit asks for.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MovementPlan {
    pub axis: Axis,
    pub direction: DirectionVector,
    /// Index of the target third along `axis` (0 = left/top).
    pub target_third: usize,
}

/// Derives the intended movement from the start and target positions.
/// `None` when the positions mix axes or coincide.
pub fn intended_movement(from: ImagePosition, to: ImagePosition) -> Option<MovementPlan> {
    use ImagePosition::*;
    let horizontal = matches!(from, Left | Right) || matches!(to, Left | Right);
    let vertical = matches!(from, Top | Bottom) || matches!(to, Top | Bottom);
    let axis = match (horizontal, vertical) {
        (true, false) => Axis::Horizontal,
        (false, true) => Axis::Vertical,
        _ => return None,
    };
    let third = |p: ImagePosition| match p {
        Left | Top => 0usize,
        Center => 1,
        Right | Bottom => 2,
    };
    let delta = third(to) as i64 - third(from) as i64;
    if delta == 0 {
        return None;
    }
    let sign = delta.signum() as f64;
    let direction = match axis {
        Axis::Horizontal => DirectionVector::new(sign, 0.0),
        // pixel rows grow downward, the y-up frame flips the sign
        Axis::Vertical => DirectionVector::new(0.0, -sign),
    }
    .expect("nonzero");
    Some(MovementPlan {
        axis,
        direction,
        target_third: third(to),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SizeDirection {
    Small,
    Big,
}

impl SizeDirection {
    pub fn parse(s: &str) -> Option<Self> {
        let mut found = None;
        for t in tokens(s) {
            let d = match t.as_str() {
                "small" | "smaller" | "tiny" | "tinier" | "little" | "shrink" | "shrunk" | "reduce" | "decrease"
                | "less" | "minimize" => SizeDirection::Small,
                "big" | "bigger" | "large" | "larger" | "huge" | "enlarge" | "increase" | "grow" | "more"
                | "maximize" => SizeDirection::Big,
                _ => continue,
            };
            match found {
                Some(prev) if prev != d => return None,
                _ => found = Some(d),
            }
        }
        found
    }
}

/// Named colours with their sRGB values (CSS / Pillow `ImageColor` values).
pub const NAMED_COLORS: [(&str, [u8; 3]); 16] = [
    ("black", [0, 0, 0]),
    ("white", [255, 255, 255]),
    ("red", [255, 0, 0]),
    ("green", [0, 128, 0]),
    ("blue", [0, 0, 255]),
    ("yellow", [255, 255, 0]),
    ("orange", [255, 165, 0]),
    ("purple", [128, 0, 128]),
    ("pink", [255, 192, 203]),
    ("brown", [165, 42, 42]),
    ("gray", [128, 128, 128]),
    ("cyan", [0, 255, 255]),
    ("magenta", [255, 0, 255]),
    ("gold", [255, 215, 0]),
    ("silver", [192, 192, 192]),
    ("beige", [245, 245, 220]),
];

/// Looks up a colour by name (case-insensitive, surrounding whitespace ignored).
pub fn named_color(name: &str) -> Option<[u8; 3]> {
    let key = name.trim().to_lowercase();
    NAMED_COLORS.iter().find(|(n, _)| *n == key).map(|(_, rgb)| *rgb)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(v: DirectionVector, dx: f64, dy: f64) -> bool {
        (v.dx - dx).abs() < 1e-12 && (v.dy - dy).abs() < 1e-12
    }

    #[test]
    fn unit_vectors() {
        assert!(close(direction_unit_vector("on top of").unwrap(), 0.0, 1.0));
        assert!(close(direction_unit_vector("left").unwrap(), -1.0, 0.0));
        assert!(close(direction_unit_vector("under").unwrap(), 0.0, -1.0));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!(close(direction_unit_vector("top right").unwrap(), h, h));
        assert!(close(direction_unit_vector("Bottom  Left").unwrap(), -h, -h));
        assert!(direction_unit_vector("near").is_none());
        assert!(direction_unit_vector("bag left").is_none());
    }

    #[test]
    fn norm_is_one() {
        for (phrase, _) in DIRECTIONS {
            let v = direction_unit_vector(phrase).unwrap();
            assert!((v.dx.hypot(v.dy) - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn splits_object_from_direction() {
        let (obj, v) = split_positional_target("bag on top of").unwrap();
        assert_eq!(obj, "bag");
        assert!(close(v, 0.0, 1.0));
        let (obj, v) = split_positional_target("cup to the left of").unwrap();
        assert_eq!(obj, "cup");
        assert!(close(v, -1.0, 0.0));
        let (obj, _) = split_positional_target("on top of the table lamp").unwrap();
        assert_eq!(obj, "table lamp");
        // longest keyword wins over its parts
        let (obj, v) = split_positional_target("kite top right").unwrap();
        assert_eq!(obj, "kite");
        assert!(v.dx > 0.0 && v.dy > 0.0);
        assert!(split_positional_target("bag floating near").is_none());
    }

    #[test]
    fn keyword_matching_is_token_based() {
        // "cover" must not match "over"
        assert!(split_positional_target("cover nearby").is_none());
    }

    #[test]
    fn movement_plans() {
        use ImagePosition::*;
        let p = intended_movement(Left, Right).unwrap();
        assert_eq!(p.axis, Axis::Horizontal);
        assert!(close(p.direction, 1.0, 0.0));
        assert_eq!(p.target_third, 2);
        let p = intended_movement(Center, Top).unwrap();
        assert_eq!(p.axis, Axis::Vertical);
        assert!(close(p.direction, 0.0, 1.0));
        assert_eq!(p.target_third, 0);
        assert!(intended_movement(Left, Left).is_none());
        assert!(intended_movement(Left, Top).is_none());
        assert!(intended_movement(Center, Center).is_none());
    }

    #[test]
    fn position_and_size_parsing() {
        assert_eq!(
            ImagePosition::parse("the right of the image"),
            Some(ImagePosition::Right)
        );
        assert_eq!(ImagePosition::parse("left right"), None);
        assert_eq!(SizeDirection::parse("larger"), Some(SizeDirection::Big));
        assert_eq!(SizeDirection::parse("Smaller"), Some(SizeDirection::Small));
        assert_eq!(SizeDirection::parse("purple"), None);
    }

    #[test]
    fn colour_table() {
        assert_eq!(NAMED_COLORS.len(), 16);
        assert_eq!(named_color(" Yellow "), Some([255, 255, 0]));
        assert_eq!(named_color("chartreuse"), None);
    }
}

//! Categorical object attributes shared by vision, language and fusion.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

macro_rules! categorical {
    ($(#[$meta:meta])* $name:ident { $($variant:ident => $text:literal),+ $(,)? }) => {
        $(#[$meta])*
        #[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
        #[serde(rename_all = "lowercase")]
        pub enum $name { $($variant),+ }

        impl $name {
            pub const ALL: &'static [$name] = &[$($name::$variant),+];

            pub fn index(self) -> usize {
                Self::ALL.iter().position(|&v| v == self).unwrap()
            }

            pub fn as_str(self) -> &'static str {
                match self { $($name::$variant => $text),+ }
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(self.as_str())
            }
        }

        impl FromStr for $name {
            type Err = String;
            fn from_str(s: &str) -> Result<Self, String> {
                match s {
                    $($text => Ok($name::$variant),)+
                    other => Err(format!("unknown {} `{}`", stringify!($name), other)),
                }
            }
        }
    };
}

categorical!(
    /// Object color. `Wooden` is the unpainted natural finish and has no per-color feature map.
    Color { Red => "red", Green => "green", Blue => "blue", Yellow => "yellow", Wooden => "wooden" }
);

categorical!(
    /// Elemental object type.
    Kind { Cube => "cube", Bar => "bar", Bolt => "bolt", Block => "block" }
);

categorical!(Size { Small => "small", Large => "large" });

categorical!(
    /// Coarse shape class addressed by words such as "long", "round".
    Shape { Elongated => "elongated", Round => "round", Angular => "angular" }
);

impl Color {
    /// Colors with a dedicated feature map.
    pub const CHROMATIC: &'static [Color] = &[Color::Red, Color::Green, Color::Blue, Color::Yellow];

    pub fn is_chromatic(self) -> bool {
        self != Color::Wooden
    }
}

impl Kind {
    pub fn shape(self) -> Shape {
        match self {
            Kind::Bar => Shape::Elongated,
            Kind::Bolt => Shape::Round,
            Kind::Cube | Kind::Block => Shape::Angular,
        }
    }

    /// Footprint `(length, width)` in mm; length runs along the major axis.
    pub fn footprint_mm(self, size: Size) -> (f64, f64) {
        let (l, w) = match self {
            Kind::Cube => (37.5, 37.5),
            Kind::Bar => (62.5, 37.5),
            Kind::Bolt => (50.0, 37.5),
            Kind::Block => (50.0, 50.0),
        };
        match (self, size) {
            (_, Size::Small) => (l, w),
            (Kind::Cube, Size::Large) => (50.0, 50.0),
            (_, Size::Large) => (l, w + 12.5),
        }
    }
}

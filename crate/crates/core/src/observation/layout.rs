use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;

pub const FRAME_WIDTH: u32 = 1920;
pub const FRAME_HEIGHT: u32 = 1080;

const STANDARD_LAYOUT: &str = include_str!("../../assets/layout.toml");

/// Axis-aligned pixel rectangle, serialized as `[x, y, w, h]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(from = "[u32; 4]", into = "[u32; 4]")]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl From<[u32; 4]> for Rect {
    fn from([x, y, w, h]: [u32; 4]) -> Self {
        Rect { x, y, w, h }
    }
}

impl From<Rect> for [u32; 4] {
    fn from(r: Rect) -> Self {
        [r.x, r.y, r.w, r.h]
    }
}

impl Rect {
    pub const fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Rect { x, y, w, h }
    }

    /// Half-open containment.
    pub fn contains(&self, px: u32, py: u32) -> bool {
        px >= self.x && px < self.x + self.w && py >= self.y && py < self.y + self.h
    }

    pub fn center(&self) -> (u32, u32) {
        (self.x + self.w / 2, self.y + self.h / 2)
    }

    pub fn right(&self) -> u32 {
        self.x + self.w
    }

    pub fn bottom(&self) -> u32 {
        self.y + self.h
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x < other.right()
            && other.x < self.right()
            && self.y < other.bottom()
            && other.y < self.bottom()
    }

    pub fn inset(&self, by: u32) -> Rect {
        let by = by.min(self.w / 2).min(self.h / 2);
        Rect::new(self.x + by, self.y + by, self.w - 2 * by, self.h - 2 * by)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WidgetKind {
    BasicButton,
    SkillButton,
    UltIcon,
    TargetFrame,
    AllyFrame,
    OrderTrackSlot,
    SpPip,
    AutoToggle,
}

impl WidgetKind {
    pub const ALL: [WidgetKind; 8] = [
        WidgetKind::BasicButton,
        WidgetKind::SkillButton,
        WidgetKind::UltIcon,
        WidgetKind::TargetFrame,
        WidgetKind::AllyFrame,
        WidgetKind::OrderTrackSlot,
        WidgetKind::SpPip,
        WidgetKind::AutoToggle,
    ];

    /// How many instances a complete layout carries.
    pub fn expected_count(self) -> usize {
        match self {
            WidgetKind::BasicButton | WidgetKind::SkillButton | WidgetKind::AutoToggle => 1,
            WidgetKind::UltIcon | WidgetKind::AllyFrame => crate::engine::task::TEAM_SIZE,
            WidgetKind::TargetFrame | WidgetKind::OrderTrackSlot => {
                crate::engine::task::MAX_ENEMIES_PER_WAVE
            }
            WidgetKind::SpPip => crate::engine::task::MAX_SP_CAP as usize,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidgetTemplate {
    pub kind: WidgetKind,
    #[serde(default)]
    pub slot: usize,
    pub rect: Rect,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hp_bar: Option<Rect>,
    /// Toughness bar on target frames, energy bar on ally frames.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub secondary_bar: Option<Rect>,
}

/// Fixed anchors of every widget on the frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layout {
    pub width: u32,
    pub height: u32,
    #[serde(rename = "widget")]
    pub widgets: Vec<WidgetTemplate>,
}

impl Layout {
    /// The shipped layout; parsed once.
    pub fn standard() -> &'static Layout {
        static CELL: OnceLock<Layout> = OnceLock::new();
        CELL.get_or_init(|| Layout::from_toml(STANDARD_LAYOUT).expect("shipped layout is valid"))
    }

    pub fn standard_source() -> &'static str {
        STANDARD_LAYOUT
    }

    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let layout: Layout = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        layout.validate()?;
        Ok(layout)
    }

    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |message: String| ConfigError::Invalid {
            field: "widget".into(),
            message,
        };
        if self.width != FRAME_WIDTH || self.height != FRAME_HEIGHT {
            return Err(ConfigError::Invalid {
                field: "width".into(),
                message: format!(
                    "frame must be {FRAME_WIDTH}x{FRAME_HEIGHT}, got {}x{}",
                    self.width, self.height
                ),
            });
        }
        let mut seen: BTreeMap<WidgetKind, Vec<usize>> = BTreeMap::new();
        for (i, w) in self.widgets.iter().enumerate() {
            let inside = |r: &Rect| {
                r.w > 0 && r.h > 0 && r.right() <= self.width && r.bottom() <= self.height
            };
            if !inside(&w.rect) {
                return Err(invalid(format!(
                    "{:?} slot {} lies outside the frame",
                    w.kind, w.slot
                )));
            }
            for bar in w.hp_bar.iter().chain(w.secondary_bar.iter()) {
                let within = bar.x >= w.rect.x
                    && bar.y >= w.rect.y
                    && bar.right() <= w.rect.right()
                    && bar.bottom() <= w.rect.bottom();
                if !within || bar.w == 0 || bar.h == 0 {
                    return Err(invalid(format!(
                        "{:?} slot {} has a bar outside its rect",
                        w.kind, w.slot
                    )));
                }
            }
            for other in &self.widgets[..i] {
                if other.rect.intersects(&w.rect) {
                    return Err(invalid(format!(
                        "{:?} slot {} overlaps {:?} slot {}",
                        w.kind, w.slot, other.kind, other.slot
                    )));
                }
            }
            seen.entry(w.kind).or_default().push(w.slot);
        }
        for kind in WidgetKind::ALL {
            let mut slots = seen.remove(&kind).unwrap_or_default();
            slots.sort_unstable();
            let expected: Vec<usize> = (0..kind.expected_count()).collect();
            if slots != expected {
                return Err(invalid(format!(
                    "{kind:?} needs slots {expected:?}, found {slots:?}"
                )));
            }
        }
        for kind in [WidgetKind::TargetFrame, WidgetKind::AllyFrame] {
            if self
                .widgets
                .iter()
                .any(|w| w.kind == kind && (w.hp_bar.is_none() || w.secondary_bar.is_none()))
            {
                return Err(invalid(format!(
                    "every {kind:?} needs hp and secondary bars"
                )));
            }
        }
        Ok(())
    }

    pub fn template(&self, kind: WidgetKind, slot: usize) -> Option<&WidgetTemplate> {
        self.widgets
            .iter()
            .find(|w| w.kind == kind && w.slot == slot)
    }
}

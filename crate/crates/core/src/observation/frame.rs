use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder, Rgb, RgbImage};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::layout::{Layout, Rect, WidgetKind};
use crate::engine::{Battle, CombatantId, Decision, Element, Side};

/// A hit-testable region of the rendered frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Widget {
    pub kind: WidgetKind,
    pub slot: usize,
    pub rect: Rect,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound_id: Option<CombatantId>,
    pub enabled: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameObservation {
    pub image: RgbImage,
    /// Widgets in drawing order; later entries are on top.
    pub layout: Vec<Widget>,
    pub frame_id: u64,
}

const BACKGROUND: Rgb<u8> = Rgb([18, 20, 28]);
const PANEL: Rgb<u8> = Rgb([40, 44, 58]);
const PANEL_DIM: Rgb<u8> = Rgb([28, 30, 38]);
const BAR_BACK: Rgb<u8> = Rgb([12, 12, 16]);
const HP_FILL: Rgb<u8> = Rgb([76, 200, 96]);
const ENEMY_HP_FILL: Rgb<u8> = Rgb([214, 64, 64]);
const TOUGHNESS_FILL: Rgb<u8> = Rgb([236, 236, 236]);
const ENERGY_FILL: Rgb<u8> = Rgb([240, 200, 60]);
const GLOW: Rgb<u8> = Rgb([255, 214, 90]);
const ACTOR: Rgb<u8> = Rgb([250, 250, 250]);
const BROKEN: Rgb<u8> = Rgb([255, 120, 0]);
const DISABLED: Rgb<u8> = Rgb([70, 70, 76]);
const TEXT: Rgb<u8> = Rgb([235, 235, 240]);
const SELECTION: Rgb<u8> = Rgb([0, 230, 230]);

pub fn element_color(e: Element) -> Rgb<u8> {
    match e {
        Element::Physical => Rgb([180, 180, 180]),
        Element::Fire => Rgb([232, 88, 40]),
        Element::Ice => Rgb([110, 200, 240]),
        Element::Lightning => Rgb([170, 100, 230]),
        Element::Wind => Rgb([80, 210, 160]),
        Element::Quantum => Rgb([90, 80, 200]),
        Element::Imaginary => Rgb([240, 220, 90]),
    }
}

fn dim(c: Rgb<u8>) -> Rgb<u8> {
    Rgb([c[0] / 3, c[1] / 3, c[2] / 3])
}

impl FrameObservation {
    pub fn width(&self) -> u32 {
        self.image.width()
    }

    pub fn height(&self) -> u32 {
        self.image.height()
    }

    pub fn hit_test(&self, x: u32, y: u32) -> Option<&Widget> {
        self.layout.iter().rev().find(|w| w.rect.contains(x, y))
    }

    pub fn widget(&self, kind: WidgetKind, slot: usize) -> Option<&Widget> {
        self.layout
            .iter()
            .find(|w| w.kind == kind && w.slot == slot)
    }

    /// The widget of `kind` currently bound to combatant `id`.
    pub fn widget_for(&self, kind: WidgetKind, id: CombatantId) -> Option<&Widget> {
        self.layout
            .iter()
            .find(|w| w.kind == kind && w.bound_id == Some(id))
    }

    /// Draws a selection outline around `rect`.
    pub fn mark(&mut self, rect: Rect) {
        outline(&mut self.image, rect, 4, SELECTION);
    }

    /// Lossless PNG encoding of the raster.
    pub fn to_png(&self) -> Vec<u8> {
        let mut out = Vec::new();
        PngEncoder::new(&mut out)
            .write_image(
                self.image.as_raw(),
                self.width(),
                self.height(),
                ExtendedColorType::Rgb8,
            )
            .expect("in-memory png encoding does not fail");
        out
    }

    /// SHA-256 of the raw RGB pixels.
    pub fn pixel_digest(&self) -> String {
        hex::encode(Sha256::digest(self.image.as_raw()))
    }
}

/// Returns the topmost widget containing `(x, y)`. Coordinates are expected
/// to be clipped to the frame already.
pub fn hit_test(frame: &FrameObservation, x: u32, y: u32) -> Option<&Widget> {
    frame.hit_test(x, y)
}

pub fn render_frame(battle: &Battle) -> FrameObservation {
    render_frame_with(battle, Layout::standard())
}

pub fn render_frame_with(battle: &Battle, layout: &Layout) -> FrameObservation {
    let state = battle.state();
    let decision = battle.decision();
    let sp_cap = battle.spec().engine.sp_cap as usize;
    let mut img = RgbImage::from_pixel(layout.width, layout.height, BACKGROUND);
    let mut widgets = Vec::with_capacity(layout.widgets.len());

    let enemies: Vec<_> = state.living_enemies().collect();
    let allies: Vec<_> = state.allies().collect();
    let order: Vec<_> = state.turn_queue.iter().map(|e| e.id).collect();

    for t in &layout.widgets {
        let r = t.rect;
        let (bound_id, enabled) = match t.kind {
            WidgetKind::BasicButton => {
                let enabled = matches!(decision, Some(Decision::OnTurn(_)));
                fill(
                    &mut img,
                    r,
                    if enabled {
                        Rgb([200, 200, 210])
                    } else {
                        DISABLED
                    },
                );
                fill(
                    &mut img,
                    r.inset(40),
                    if enabled { PANEL } else { PANEL_DIM },
                );
                (None, enabled)
            }
            WidgetKind::SkillButton => {
                let enabled = state.skill_points >= 1;
                fill(
                    &mut img,
                    r,
                    if enabled {
                        Rgb([80, 140, 240])
                    } else {
                        DISABLED
                    },
                );
                fill(
                    &mut img,
                    r.inset(60),
                    if enabled { TEXT } else { PANEL_DIM },
                );
                (None, enabled)
            }
            WidgetKind::UltIcon => {
                let ally = allies.get(t.slot).copied();
                let enabled = ally.is_some_and(|a| a.is_alive() && a.energy_full());
                let offered = ally.is_some_and(|a| decision == Some(Decision::Interrupt(a.id)));
                fill(&mut img, r, PANEL_DIM);
                if let Some(a) = ally {
                    let frac = (a.energy / a.energy_max).clamp(0.0, 1.0);
                    let inner = r.inset(8);
                    let filled = (frac * inner.h as f64).round() as u32;
                    let color = if a.is_alive() {
                        element_color(a.element)
                    } else {
                        DISABLED
                    };
                    fill(
                        &mut img,
                        Rect::new(inner.x, inner.bottom() - filled, inner.w, filled),
                        color,
                    );
                }
                if enabled {
                    outline(&mut img, r, 6, GLOW);
                }
                if offered {
                    outline(&mut img, r.inset(10), 3, ACTOR);
                }
                (ally.map(|a| a.id), enabled)
            }
            WidgetKind::TargetFrame => {
                let enemy = enemies.get(t.slot).copied();
                match enemy {
                    Some(e) => {
                        fill(&mut img, r, PANEL);
                        fill(
                            &mut img,
                            Rect::new(r.x + 16, r.y + 16, 64, 64),
                            element_color(e.element),
                        );
                        draw_number(
                            &mut img,
                            r.x + 100,
                            r.y + 26,
                            6,
                            (e.hp * 100.0 / e.max_hp).ceil() as u64,
                            TEXT,
                        );
                        if let Some(bar) = t.hp_bar {
                            draw_bar(&mut img, bar, e.hp / e.max_hp, ENEMY_HP_FILL);
                        }
                        if let Some(bar) = t.secondary_bar {
                            let frac = if e.toughness_max > 0.0 {
                                e.toughness / e.toughness_max
                            } else {
                                0.0
                            };
                            draw_bar(&mut img, bar, frac, TOUGHNESS_FILL);
                        }
                        for (k, w) in e.weaknesses.iter().enumerate() {
                            let icon = Rect::new(r.x + 16 + 30 * k as u32, r.bottom() - 34, 22, 22);
                            if icon.right() <= r.right() {
                                fill(&mut img, icon, element_color(*w));
                            }
                        }
                        if e.broken {
                            outline(&mut img, r, 6, BROKEN);
                        }
                        (Some(e.id), true)
                    }
                    None => {
                        fill(&mut img, r, PANEL_DIM);
                        (None, false)
                    }
                }
            }
            WidgetKind::AllyFrame => {
                let ally = allies.get(t.slot).copied();
                let Some(a) = ally else {
                    fill(&mut img, r, PANEL_DIM);
                    widgets.push(Widget {
                        kind: t.kind,
                        slot: t.slot,
                        rect: r,
                        bound_id: None,
                        enabled: false,
                    });
                    continue;
                };
                let alive = a.is_alive();
                fill(&mut img, r, if alive { PANEL } else { PANEL_DIM });
                let portrait = element_color(a.element);
                fill(
                    &mut img,
                    Rect::new(r.x + 12, r.y + 12, 80, 80),
                    if alive { portrait } else { dim(portrait) },
                );
                draw_number(
                    &mut img,
                    r.x + 104,
                    r.y + 24,
                    5,
                    (a.hp * 100.0 / a.max_hp).ceil() as u64,
                    TEXT,
                );
                if let Some(bar) = t.hp_bar {
                    draw_bar(&mut img, bar, a.hp / a.max_hp, HP_FILL);
                }
                if let Some(bar) = t.secondary_bar {
                    draw_bar(&mut img, bar, a.energy / a.energy_max, ENERGY_FILL);
                }
                if decision == Some(Decision::OnTurn(a.id)) {
                    outline(&mut img, r, 6, ACTOR);
                }
                (Some(a.id), alive)
            }
            WidgetKind::OrderTrackSlot => {
                let who = order.get(t.slot).and_then(|id| state.get(*id));
                match who {
                    Some(c) => {
                        let side = if c.side == Side::Ally {
                            Rgb([60, 90, 160])
                        } else {
                            Rgb([150, 50, 50])
                        };
                        fill(&mut img, r, side);
                        fill(
                            &mut img,
                            Rect::new(r.x + 10, r.y + 16, 64, 64),
                            element_color(c.element),
                        );
                        draw_number(&mut img, r.x + 86, r.y + 30, 5, u64::from(c.id.0), TEXT);
                        (Some(c.id), false)
                    }
                    None => {
                        fill(&mut img, r, PANEL_DIM);
                        (None, false)
                    }
                }
            }
            WidgetKind::SpPip => {
                if t.slot >= sp_cap {
                    continue;
                }
                let lit = (t.slot as u32) < state.skill_points;
                fill(
                    &mut img,
                    r,
                    if lit { Rgb([120, 190, 255]) } else { PANEL_DIM },
                );
                outline(&mut img, r, 2, TEXT);
                (None, false)
            }
            WidgetKind::AutoToggle => {
                fill(&mut img, r, DISABLED);
                fill(&mut img, r.inset(18), PANEL_DIM);
                (None, false)
            }
        };
        widgets.push(Widget {
            kind: t.kind,
            slot: t.slot,
            rect: r,
            bound_id,
            enabled,
        });
    }

    FrameObservation {
        image: img,
        layout: widgets,
        frame_id: u64::from(state.step_count),
    }
}

fn fill(img: &mut RgbImage, r: Rect, color: Rgb<u8>) {
    let x1 = r.right().min(img.width());
    let y1 = r.bottom().min(img.height());
    for y in r.y..y1 {
        for x in r.x..x1 {
            img.put_pixel(x, y, color);
        }
    }
}

fn outline(img: &mut RgbImage, r: Rect, thickness: u32, color: Rgb<u8>) {
    let t = thickness.min(r.w / 2).min(r.h / 2);
    fill(img, Rect::new(r.x, r.y, r.w, t), color);
    fill(img, Rect::new(r.x, r.bottom() - t, r.w, t), color);
    fill(img, Rect::new(r.x, r.y, t, r.h), color);
    fill(img, Rect::new(r.right() - t, r.y, t, r.h), color);
}

/// Proportional bar: `round(frac * w)` leftmost columns are filled.
fn draw_bar(img: &mut RgbImage, bar: Rect, frac: f64, color: Rgb<u8>) {
    fill(img, bar, BAR_BACK);
    let filled = filled_width(bar.w, frac);
    fill(img, Rect::new(bar.x, bar.y, filled, bar.h), color);
}

pub(crate) fn filled_width(width: u32, frac: f64) -> u32 {
    let frac = if frac.is_finite() {
        frac.clamp(0.0, 1.0)
    } else {
        0.0
    };
    (frac * f64::from(width)).round() as u32
}

// 3x5 bitmap digits, one row per u8 (low three bits, MSB left).
const DIGITS: [[u8; 5]; 10] = [
    [0b111, 0b101, 0b101, 0b101, 0b111],
    [0b010, 0b110, 0b010, 0b010, 0b111],
    [0b111, 0b001, 0b111, 0b100, 0b111],
    [0b111, 0b001, 0b111, 0b001, 0b111],
    [0b101, 0b101, 0b111, 0b001, 0b001],
    [0b111, 0b100, 0b111, 0b001, 0b111],
    [0b111, 0b100, 0b111, 0b101, 0b111],
    [0b111, 0b001, 0b010, 0b010, 0b010],
    [0b111, 0b101, 0b111, 0b101, 0b111],
    [0b111, 0b101, 0b111, 0b001, 0b111],
];

fn draw_number(img: &mut RgbImage, x: u32, y: u32, scale: u32, value: u64, color: Rgb<u8>) {
    let text = value.to_string();
    for (i, ch) in text.bytes().enumerate() {
        let glyph = DIGITS[usize::from(ch - b'0')];
        let gx = x + i as u32 * 4 * scale;
        for (row, bits) in glyph.iter().enumerate() {
            for col in 0..3u32 {
                if bits & (0b100 >> col) != 0 {
                    fill(
                        img,
                        Rect::new(gx + col * scale, y + row as u32 * scale, scale, scale),
                        color,
                    );
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::engine::builtin_task;

    fn battle() -> Battle {
        let mut b = Battle::new(Arc::new(builtin_task(1).unwrap()), 3).unwrap();
        b.advance().unwrap();
        b
    }

    #[test]
    fn frame_has_fixed_resolution_and_complete_layout() {
        let f = render_frame(&battle());
        assert_eq!((f.width(), f.height()), (1920, 1080));
        for kind in WidgetKind::ALL {
            let n = f.layout.iter().filter(|w| w.kind == kind).count();
            let expected = if kind == WidgetKind::SpPip {
                5
            } else {
                kind.expected_count()
            };
            assert_eq!(n, expected, "{kind:?}");
        }
        for w in &f.layout {
            assert!(w.rect.right() <= 1920 && w.rect.bottom() <= 1080);
        }
    }

    #[test]
    fn skill_button_disabled_without_points() {
        let mut b = battle();
        b.state_mut().skill_points = 0;
        let f = render_frame(&b);
        let w = f.widget(WidgetKind::SkillButton, 0).unwrap();
        assert!(!w.enabled);
        assert_eq!(*f.image.get_pixel(w.rect.x + 2, w.rect.y + 2), DISABLED);
        b.state_mut().skill_points = 1;
        assert!(
            render_frame(&b)
                .widget(WidgetKind::SkillButton, 0)
                .unwrap()
                .enabled
        );
    }

    #[test]
    fn render_is_deterministic() {
        let b = battle();
        assert_eq!(render_frame(&b).to_png(), render_frame(&b).to_png());
    }

    #[test]
    fn half_hp_fills_half_the_bar() {
        let mut b = battle();
        let boss = b.state().living_enemies().next().unwrap().id;
        let c = b.state_mut().get_mut(boss).unwrap();
        c.hp = c.max_hp * 0.5;
        let f = render_frame(&b);
        let bar = Layout::standard()
            .template(WidgetKind::TargetFrame, 0)
            .unwrap()
            .hp_bar
            .unwrap();
        let y = bar.y + bar.h / 2;
        let lit = (bar.x..bar.right())
            .filter(|x| *f.image.get_pixel(*x, y) == ENEMY_HP_FILL)
            .count() as i64;
        assert!((lit - (0.5 * bar.w as f64).round() as i64).abs() <= 1);
    }

    #[test]
    fn hit_test_examples() {
        let f = render_frame(&battle());
        let basic = *f.widget(WidgetKind::BasicButton, 0).unwrap();
        let (cx, cy) = basic.rect.center();
        assert_eq!(f.hit_test(cx, cy).unwrap().kind, WidgetKind::BasicButton);
        assert!(f.hit_test(0, 0).is_none());
        let edge = basic.rect.right();
        assert_ne!(
            f.hit_test(edge, cy).map(|w| w.kind),
            Some(WidgetKind::BasicButton)
        );
        assert_eq!(
            f.hit_test(edge - 1, cy).unwrap().kind,
            WidgetKind::BasicButton
        );
    }

    #[test]
    fn disabled_widgets_are_still_hit() {
        let f = render_frame(&battle());
        let toggle = f.widget(WidgetKind::AutoToggle, 0).unwrap();
        let (x, y) = toggle.rect.center();
        let hit = f.hit_test(x, y).unwrap();
        assert_eq!(hit.kind, WidgetKind::AutoToggle);
        assert!(!hit.enabled);
    }

    #[test]
    fn ult_icon_tracks_full_energy() {
        let mut b = battle();
        b.state_mut().roster[2].energy = b.state().roster[2].energy_max;
        let f = render_frame(&b);
        assert!(f.widget(WidgetKind::UltIcon, 2).unwrap().enabled);
        assert!(!f.widget(WidgetKind::UltIcon, 1).unwrap().enabled);
    }

    #[test]
    fn png_round_trips() {
        let f = render_frame(&battle());
        let decoded = image::load_from_memory(&f.to_png()).unwrap().to_rgb8();
        assert_eq!(decoded.as_raw(), f.image.as_raw());
    }

    #[test]
    fn bar_width_rounds() {
        assert_eq!(filled_width(248, 0.5), 124);
        assert_eq!(filled_width(186, 1.0), 186);
        assert_eq!(filled_width(186, -0.1), 0);
        assert_eq!(filled_width(3, 0.5), 2);
    }
}

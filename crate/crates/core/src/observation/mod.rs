//! The two observation channels.
//!
//! Direct control sees a schematic 1920x1080 raster plus the widget hit-map
//! used to resolve clicks (the map itself is never sent to the agent).
//! Tool-assisted control sees a [`StructuredObservation`], with or without
//! the OCR-gated numeric fields.

mod frame;
mod layout;
mod text;

pub use frame::{
    element_color, hit_test, render_frame, render_frame_with, FrameObservation, Widget,
};
pub use layout::{Layout, Rect, WidgetKind, WidgetTemplate, FRAME_HEIGHT, FRAME_WIDTH};
pub use text::{
    textify, AllyView, ControlFlags, DecisionKind, DecisionView, EnemyView, StatusView,
    StructuredObservation, TURN_ORDER_DEPTH,
};

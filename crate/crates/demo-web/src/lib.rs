//! Browser demo bindings (placeholder while the engine is under construction).

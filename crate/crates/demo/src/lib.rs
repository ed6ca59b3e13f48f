//! WebAssembly bindings for the static demo page in `www/`.

mod engine;

use wasm_bindgen::prelude::*;

pub use engine::{analyze_json, Engine};

/// Tokens, lemmas and tags of `text` as JSON.
#[wasm_bindgen]
pub fn analyze(text: &str, domain: bool) -> String {
    analyze_json(text, domain)
}

/// A router trained in the page on a generated corpus.
#[wasm_bindgen]
pub struct Demo {
    engine: Engine,
}

#[wasm_bindgen]
impl Demo {
    #[wasm_bindgen(constructor)]
    pub fn new(
        records: u32,
        seed: u32,
        abbreviation_rate: f64,
        domain: bool,
        stages: u32,
    ) -> Result<Demo, JsError> {
        Engine::new(
            records as usize,
            u64::from(seed),
            abbreviation_rate,
            domain,
            stages as usize,
        )
        .map(|engine| Demo { engine })
        .map_err(|e| JsError::new(&e.to_string()))
    }

    pub fn summary(&self) -> String {
        self.engine.summary_json()
    }

    pub fn route(&self, detail: &str) -> String {
        self.engine.route_json(detail)
    }

    pub fn roc(&self, department: &str) -> Result<String, JsError> {
        self.engine
            .roc_json(department)
            .map_err(|e| JsError::new(&e))
    }
}

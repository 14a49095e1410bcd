//! Scene-context reporting: a 5 s scene timeline with transitions,
//! alarm-level tallies of detected sound events, ontology-group histograms,
//! and their figures.

mod alarms;
mod render;
pub mod scenario;
mod taxonomy;
mod timeline;

pub use alarms::*;
pub use render::*;
pub use taxonomy::*;
pub use timeline::*;

/// Detection threshold used when none is configured.
pub const DEFAULT_THRESHOLD: f64 = 0.3;

/// Timeline, tallies and histograms in one pass.
pub fn analyse(
    clip: &crate::audio::AudioClip,
    classifier: &dyn SceneClassifier,
    events: &EventProbabilities,
    taxonomy: &EventTaxonomy,
    threshold: f64,
) -> crate::Result<SceneReport> {
    let tl = segment_and_classify(clip, classifier, SEGMENT_S)?;
    if events.rows.len() < tl.segments.len() {
        return Err(crate::Error::InvalidInput(format!(
            "{} segments but event scores for only {}",
            tl.segments.len(),
            events.rows.len()
        )));
    }
    let ev = EventProbabilities { names: events.names.clone(), rows: events.rows[..tl.segments.len()].to_vec() };
    let counts = alarm_counts(&ev, taxonomy, threshold)?;
    let ratios = alarm_ratios(&counts);
    let hist = ontology_distribution(&ev, taxonomy, threshold)?;
    build_report(&tl, &counts, &ratios, &hist, threshold, taxonomy.version)
}

#[cfg(test)]
mod tests;

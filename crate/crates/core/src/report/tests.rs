use super::scenario::*;
use super::*;
use crate::audio::AudioClip;
use proptest::prelude::*;

fn data_values(svg: &str, class: &str) -> Vec<f64> {
    let tag = format!("class=\"{class}\"");
    svg.lines()
        .filter(|l| l.contains(&tag))
        .map(|l| {
            let s = l.split("data-value=\"").nth(1).unwrap();
            s[..s.find('"').unwrap()].parse().unwrap()
        })
        .collect()
}

fn scenario_report() -> SceneReport {
    let tax = EventTaxonomy::builtin();
    let sc = riot_scenario(&tax, 7).unwrap();
    analyse(&sc.clip, &sc.classifier, &sc.events, &tax, DEFAULT_THRESHOLD).unwrap()
}

#[test]
fn scripted_scenario_transitions_and_highlight() {
    let r = scenario_report();
    assert_eq!(r.segments.len(), 16);
    let times: Vec<f64> = r.transitions.iter().map(|t| t.time_s).collect();
    assert_eq!(times, vec![10.0, 20.0, 30.0, 40.0, 50.0]);
    assert_eq!(r.transitions[4].before, "metro_station");
    assert_eq!(r.transitions[4].after, "riot");
    for s in &r.segments {
        assert_eq!(s.start_s % 5.0, 0.0);
        assert_eq!(s.label, scene_at(s.start_s));
        assert_eq!(s.highlight.is_some(), s.start_s >= 50.0);
        assert!((s.probs.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }
}

#[test]
fn highlighted_spans_merge() {
    let tax = EventTaxonomy::builtin();
    let sc = riot_scenario(&tax, 1).unwrap();
    let tl = segment_and_classify(&sc.clip, &sc.classifier, SEGMENT_S).unwrap();
    assert_eq!(tl.highlighted_spans("red"), vec![(50.0, 80.0)]);
}

#[test]
fn riot_is_red_and_human_machine_heavy() {
    let r = scenario_report();
    for s in &r.segments {
        if s.label == "riot" {
            assert!(s.counts.red >= 1);
            let top2: Vec<&String> = {
                let mut v: Vec<(&String, &usize)> = s.ontology.iter().collect();
                v.sort_by(|a, b| b.1.cmp(a.1).then(a.0.cmp(b.0)));
                v.iter().take(2).map(|p| p.0).collect()
            };
            assert!(top2.contains(&&"Human".to_string()) && top2.contains(&&"Machine-or-Vehicle".to_string()), "{top2:?}");
        } else {
            assert_eq!(s.counts.red, 0, "{}", s.label);
        }
        let sum = s.ratios.red + s.ratios.yellow + s.ratios.green;
        assert!((sum - 100.0).abs() < 1e-9);
        assert_eq!(s.ontology.values().sum::<usize>(), s.counts.total());
    }
}

#[test]
fn constant_scene_has_no_transitions() {
    let tax = EventTaxonomy::builtin();
    let sc = riot_scenario(&tax, 1).unwrap();
    let x: Vec<f32> = (0..32_000 * 20).map(|i| (2.0 * std::f64::consts::PI * 1000.0 * i as f64 / 32_000.0).sin() as f32).collect();
    let clip = AudioClip::new(x, 32_000, "flat").unwrap();
    let tl = segment_and_classify(&clip, &sc.classifier, SEGMENT_S).unwrap();
    assert_eq!(tl.segments.len(), 4);
    assert!(tl.transitions.is_empty());
    assert!(tl.labels().iter().all(|l| *l == "public_square"));
}

#[test]
fn short_clip_and_partial_tail() {
    let tax = EventTaxonomy::builtin();
    let sc = riot_scenario(&tax, 1).unwrap();
    let short = AudioClip::new(vec![0.1; 32_000 * 4], 32_000, "s").unwrap();
    assert!(matches!(segment_and_classify(&short, &sc.classifier, 5.0), Err(crate::Error::InvalidInput(_))));
    let tail = sc.clip.slice(0, 32_000 * 12, "t").unwrap();
    assert_eq!(segment_and_classify(&tail, &sc.classifier, 5.0).unwrap().segments.len(), 2);
}

#[test]
fn alarm_count_cases() {
    let tax = EventTaxonomy::builtin();
    let names = vec!["Gunshot, gunfire".to_string(), "Speech".to_string(), "Shout".to_string(), "Mystery".to_string()];
    let ev = EventProbabilities::new(names, vec![vec![0.9, 0.5, 0.1, 0.0], vec![0.1, 0.1, 0.1, 0.1], vec![0.0, 0.0, 0.0, 0.8]]).unwrap();
    let c = alarm_counts(&ev, &tax, 0.3).unwrap();
    assert_eq!((c[0].red, c[0].yellow, c[0].green), (1, 0, 1));
    assert_eq!(c[1].total(), 0);
    assert_eq!((c[2].red, c[2].green), (0, 1));
    let r = alarm_ratios(&c);
    assert_eq!((r[0].red, r[0].yellow, r[0].green), (50.0, 0.0, 50.0));
    assert_eq!((r[1].red, r[1].yellow, r[1].green), (0.0, 0.0, 100.0));
    let h = ontology_distribution(&ev, &tax, 0.3).unwrap();
    assert!(h[1].is_empty());
    assert_eq!(h[2].get(UNMAPPED_GROUP), Some(&1));
    assert!(alarm_counts(&ev, &tax, 1.0).is_err());
    assert!(EventProbabilities::new(vec!["a".into()], vec![vec![1.5]]).is_err());
}

proptest! {
    #[test]
    fn counts_fall_with_threshold(scores in proptest::collection::vec(0.0f32..=1.0, 40), t1 in 0.01f64..0.99, t2 in 0.01f64..0.99) {
        let tax = EventTaxonomy::builtin();
        let names: Vec<String> = tax.entries().iter().skip(420).take(40).map(|e| e.event.clone()).collect();
        let ev = EventProbabilities::new(names, vec![scores]).unwrap();
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        let a = &alarm_counts(&ev, &tax, lo).unwrap()[0];
        let b = &alarm_counts(&ev, &tax, hi).unwrap()[0];
        prop_assert!(b.red <= a.red && b.yellow <= a.yellow && b.green <= a.green);
        let r = alarm_ratios(&alarm_counts(&ev, &tax, lo).unwrap())[0];
        prop_assert!((r.red + r.yellow + r.green - 100.0).abs() < 1e-9);
        prop_assert!((r.red * a.total() as f64 / 100.0 - a.red as f64).abs() < 1e-9 || a.total() == 0);
    }
}

#[test]
fn figures_carry_table_series_and_are_deterministic() {
    let r = scenario_report();
    let figs = render_figures(&r).unwrap();
    assert_eq!(figs.iter().map(|f| f.0).collect::<Vec<_>>(), FIGURES.to_vec());
    let counts = &figs[1].1;
    let red: Vec<f64> = r.segments.iter().map(|s| s.counts.red as f64).collect();
    assert_eq!(data_values(counts, "RED"), red);
    let crowd: Vec<f64> = r.segments.iter().map(|s| s.counts.yellow_groups["crowd"] as f64).collect();
    assert_eq!(data_values(counts, "YELLOW/crowd"), crowd);
    let green: Vec<f64> = r.segments.iter().map(|s| s.ratios.green).collect();
    assert_eq!(data_values(&figs[2].1, "GREEN"), green);
    let human: Vec<f64> = r.segments.iter().map(|s| *s.ontology.get("Human").unwrap_or(&0) as f64).collect();
    assert_eq!(data_values(&figs[3].1, "Human"), human);
    assert_eq!(figs[0].1.matches("class=\"transition\"").count(), 5);

    let d1 = tempfile::tempdir().unwrap();
    let d2 = tempfile::tempdir().unwrap();
    let p1 = render_report(&r, d1.path()).unwrap();
    render_report(&scenario_report(), d2.path()).unwrap();
    assert_eq!(p1.len(), 5);
    for p in &p1 {
        let name = p.file_name().unwrap();
        assert_eq!(std::fs::read(p).unwrap(), std::fs::read(d2.path().join(name)).unwrap(), "{name:?}");
    }
}

#[test]
fn empty_timeline_is_rejected() {
    let tl = SceneTimeline { segment_s: 5.0, classes: vec![], segments: vec![], transitions: vec![], highlights: default_highlights() };
    assert!(build_report(&tl, &[], &[], &[], 0.3, 1).is_err());
}

use astro_core::synth::{generate, AttackKind, SynthConfig};

fn column(t: &astro_core::SeriesTable, c: usize, normal_only: bool) -> Vec<f64> {
    (0..t.n_rows())
        .filter(|&r| !normal_only || t.labels[r] == 0)
        .map(|r| t.value(r, c))
        .collect()
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let s = (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
    (m, s)
}

fn pearson(a: &[f64], b: &[f64]) -> f64 {
    let (ma, sa) = mean_std(a);
    let (mb, sb) = mean_std(b);
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() as f64 * sa * sb)
}

#[test]
fn default_attack_fraction_within_tolerance() {
    let out = generate(&SynthConfig::default()).unwrap();
    let (neg, pos) = out.table.label_counts();
    assert_eq!(neg + pos, 30_000);
    let frac = pos as f64 / 30_000.0;
    assert!((frac - 0.10).abs() <= 0.01, "{frac}");
}

#[test]
fn zero_attack_fraction_means_no_labels() {
    let out = generate(&SynthConfig {
        attack_fraction: 0.0,
        length: 2000,
        ..SynthConfig::default()
    })
    .unwrap();
    assert!(out.table.labels.iter().all(|&y| y == 0));
    assert!(out.segments.is_empty());
}

#[test]
fn subsystem_members_correlate_more_than_distant_subsystems() {
    let cfg = SynthConfig::default();
    let out = generate(&cfg).unwrap();
    let cols: Vec<Vec<f64>> = (0..cfg.n_nodes()).map(|c| column(&out.table, c, true)).collect();
    let per = cfg.nodes_per_subsystem;
    let mut within = f64::INFINITY;
    let mut distant: f64 = 0.0;
    for a in 0..cfg.n_nodes() {
        for b in a + 1..cfg.n_nodes() {
            let (sa, sb) = (a / per, b / per);
            let r = pearson(&cols[a], &cols[b]);
            if sa == sb {
                within = within.min(r);
            } else if sb - sa >= 2 {
                distant = distant.max(r.abs());
            }
        }
    }
    assert!(within - distant >= 0.2, "within {within}, distant {distant}");
}

#[test]
fn spikes_are_visible_to_a_three_sigma_rule() {
    let cfg = SynthConfig {
        attack_types: vec![AttackKind::Spike],
        ..SynthConfig::default()
    };
    let out = generate(&cfg).unwrap();
    let stats: Vec<(f64, f64)> = (0..cfg.n_nodes())
        .map(|c| mean_std(&column(&out.table, c, true)))
        .collect();
    let (mut hit, mut total) = (0usize, 0usize);
    for seg in &out.segments {
        for &c in &seg.nodes {
            let (m, s) = stats[c];
            for r in seg.start..seg.start + seg.len {
                total += 1;
                hit += usize::from((out.table.value(r, c) - m).abs() > 3.0 * s);
            }
        }
    }
    let recall = hit as f64 / total as f64;
    assert!(recall >= 0.9, "{recall}");
}

#[test]
fn plant_matches_table_columns() {
    let out = generate(&SynthConfig {
        length: 500,
        ..SynthConfig::default()
    })
    .unwrap();
    assert_eq!(out.plant.node_ids(), out.table.column_names);
    assert_eq!(out.plant.adjacencies.len(), 3);
}

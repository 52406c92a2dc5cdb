use hdplab_core::moments::{lln_experiment, mc_integral_variance, mc_stick_moments, variance_of_integral};
use hdplab_core::{BaseDistribution, CosineFamily, Params, SamplerConfig, TestFunction};

fn p(alpha: f64, beta: f64) -> Params {
    Params::from_concentrations(alpha, beta).unwrap()
}

#[test]
fn stick_moments_within_four_standard_errors() {
    for (k, (alpha, beta)) in [(10.0, 10.0), (10.0, 40.0), (40.0, 10.0), (0.7, 2.0)].into_iter().enumerate() {
        let reports = mc_stick_moments(&p(alpha, beta), &SamplerConfig::fixed(k as u64, 5), 50_000, 5);
        assert_eq!(reports.len(), 10);
        for r in reports {
            assert!(!r.flagged, "α={alpha} β={beta}: {r:?}");
        }
    }
}

#[test]
fn integral_variance_matches_closed_form() {
    let cfg = SamplerConfig::tolerance(3, 1e-8).unwrap();
    let cases = [
        (p(10.0, 10.0), BaseDistribution::Uniform, TestFunction::identity()),
        (p(5.0, 20.0), BaseDistribution::Uniform, TestFunction::Cosine(1)),
        (p(20.0, 5.0), BaseDistribution::beta(2.0, 3.0).unwrap(), TestFunction::Power(2)),
        (
            p(8.0, 8.0),
            BaseDistribution::finite_support(vec![0.1, 0.6], vec![0.3, 0.7]).unwrap(),
            TestFunction::identity(),
        ),
    ];
    for (params, base, f) in cases {
        let report = mc_integral_variance(&params, &base, &f, &cfg, 40_000).unwrap();
        assert!(!report.flagged, "{report:?}");
        assert_eq!(report.closed_form, variance_of_integral(&params, &base, &f).unwrap());
    }
}

#[test]
fn lln_sweep_shrinks_toward_base() {
    let grid: Vec<Params> = [10.0, 20.0, 40.0].iter().map(|&a| p(a, a)).collect();
    let cfg = SamplerConfig::tolerance(9, 1e-6).unwrap();
    let rows = lln_experiment(&grid, &BaseDistribution::Uniform, &CosineFamily, 8, &cfg, 4_000).unwrap();
    for row in &rows {
        assert!(!row.d_flagged, "{row:?}");
        assert!(row.d_bias_bound < 1e-12);
        assert!(row.rho_bias_bound < 0.005);
    }
    for pair in rows.windows(2) {
        assert!(pair[1].rho_mean < pair[0].rho_mean);
        assert!(pair[1].d_mean < pair[0].d_mean);
    }
}

#[test]
fn lln_with_beta_base_uses_quadrature_means() {
    let grid = [p(15.0, 15.0)];
    let cfg = SamplerConfig::tolerance(1, 1e-6).unwrap();
    let base = BaseDistribution::beta(2.0, 5.0).unwrap();
    let rows = lln_experiment(&grid, &base, &CosineFamily, 6, &cfg, 2_000).unwrap();
    assert!(rows[0].rho_mean > 0.0 && rows[0].rho_mean < 0.5);
}

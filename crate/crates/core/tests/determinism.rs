use gnsch::config::RunConfig;
use gnsch::driver;

const CFG: &str = r#"
seed = 42

[grid]
nx = 24

[physics]
alpha1 = 1.2
alpha2 = 0.5

[initial]
kind = "noise"
rho = 0.9
ux = 1.0
c_mean = 0.5
amplitude = 0.05

[time]
t_final = 5e-4
"#;

fn series(cfg: &RunConfig) -> Vec<driver::DiagRecord> {
    driver::run(cfg, |_| Ok(())).unwrap().diagnostics
}

#[test]
fn same_seed_same_bits() {
    let cfg = RunConfig::from_toml_str(CFG).unwrap();
    let a = series(&cfg);
    let b = series(&cfg);
    assert!(!a.is_empty());
    assert_eq!(a.len(), b.len());
    for (x, y) in a.iter().zip(&b) {
        assert_eq!(x.energy.to_bits(), y.energy.to_bits());
        assert_eq!(x.total_mass.to_bits(), y.total_mass.to_bits());
        assert_eq!(x.xi.to_bits(), y.xi.to_bits());
        assert_eq!(x.c_min.to_bits(), y.c_min.to_bits());
    }
}

#[test]
fn different_seed_different_series() {
    let mut cfg = RunConfig::from_toml_str(CFG).unwrap();
    let a = series(&cfg);
    cfg.seed = 43;
    let b = series(&cfg);
    assert_ne!(a.last().unwrap().energy, b.last().unwrap().energy);
}

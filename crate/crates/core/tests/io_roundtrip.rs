use gnsch::config::{GridSpec, Initial, RunConfig};
use gnsch::driver::{self, ConvergenceTable};
use gnsch::io;
use gnsch::mesh::Axis;

fn tiny(nx: usize, dim: usize) -> RunConfig {
    RunConfig {
        grid: GridSpec {
            dim,
            nx,
            ny: if dim == 2 { nx } else { 1 },
            ..GridSpec::default()
        },
        initial: Initial::Noise {
            rho: 0.9,
            c_mean: 0.5,
            amplitude: 0.05,
            ux: 1.0,
            uy: 0.0,
        },
        seed: 3,
        ..RunConfig::default()
    }
}

#[test]
fn snapshot_has_header_plus_one_line_per_cell() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny(4, 1);
    let st = driver::init_state(&cfg).unwrap();
    let path = tmp.path().join("snap.csv");
    io::write_snapshot(&st, &cfg.physics, &path).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert_eq!(text.lines().next().unwrap(), "x,rho,c,vx,p,mu");
}

#[test]
fn snapshot_reads_back_bit_exact() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny(4, 1);
    let st = driver::init_state(&cfg).unwrap();
    let path = tmp.path().join("snap.csv");
    io::write_snapshot(&st, &cfg.physics, &path).unwrap();
    let t = io::read_table(&path).unwrap();
    assert_eq!(t.column("c").unwrap(), st.c.values());
    assert_eq!(t.column("rho").unwrap(), st.rho().values());
    assert_eq!(t.column("vx").unwrap(), st.velocity(Axis::X).values());
    assert_eq!(t.column("mu").unwrap(), st.mu.values());
    assert_eq!(t.column("p").unwrap(), st.pressure(&cfg.physics).unwrap().values());
}

#[test]
fn snapshot_2d_columns() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tiny(3, 2);
    let st = driver::init_state(&cfg).unwrap();
    let path = tmp.path().join("snap.csv");
    io::write_snapshot(&st, &cfg.physics, &path).unwrap();
    let t = io::read_table(&path).unwrap();
    assert_eq!(t.header, ["x", "y", "rho", "c", "vx", "vy", "p", "mu"]);
    assert_eq!(t.rows.len(), 9);
    // lexicographic: x runs fastest
    assert!(t.rows[0][0] < t.rows[1][0]);
    assert_eq!(t.rows[0][1], t.rows[1][1]);
}

#[test]
fn diagnostics_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = tiny(8, 1);
    cfg.time.t_final = 5e-5;
    let out = driver::run(&cfg, |_| Ok(())).unwrap();
    assert_eq!(out.diagnostics.len(), out.final_state.step_index);
    let path = tmp.path().join("diagnostics.csv");
    io::write_diagnostics(&out.diagnostics, &path).unwrap();
    let back = io::read_diagnostics(&path).unwrap();
    assert_eq!(back, out.diagnostics);
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), out.diagnostics.len() + 1);
    assert_eq!(text.lines().next().unwrap(), io::DIAG_HEADER.join(","));
}

#[test]
fn diag_stride_thins_records() {
    let mut cfg = tiny(8, 1);
    cfg.time.t_final = 5e-5;
    cfg.output.diag_stride = 2;
    let out = driver::run(&cfg, |_| Ok(())).unwrap();
    assert!(out.diagnostics.iter().all(|d| d.step % 2 == 0));
    assert_eq!(out.diagnostics.len(), out.final_state.step_index / 2);
}

#[test]
fn convergence_table_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let table = ConvergenceTable::from_points(&[0.1, 0.05, 0.025], &[1e-2, 5.1e-3, 2.4e-3]).unwrap();
    let path = tmp.path().join("conv.csv");
    io::write_convergence(&table, &path).unwrap();
    let t = io::read_table(&path).unwrap();
    assert_eq!(t.header, ["resolution", "error", "order"]);
    assert_eq!(t.column("error").unwrap(), [1e-2, 5.1e-3, 2.4e-3]);
    assert!(t.rows[0][2].is_nan());
    assert_eq!(t.rows[2][2], table.rows[2].order);
}

#[test]
fn wrong_header_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("d.csv");
    std::fs::write(&path, "step,t\n1,0.5\n").unwrap();
    assert!(matches!(io::read_diagnostics(&path), Err(gnsch::Error::Parse { .. })));
}

#[test]
fn bad_number_reports_line() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("t.csv");
    std::fs::write(&path, "a,b\n1,2\n3,oops\n").unwrap();
    match io::read_table(&path) {
        Err(gnsch::Error::Parse { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
}

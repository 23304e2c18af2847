use qdiscrim::io::{
    read_field, read_fits, read_m_table, read_sweep, write_field, write_fits, write_m_curve, write_sweep,
};
use qdiscrim::protocols::{fit_effective_time, MCurve, Protocol, SweepRow};
use qdiscrim::{ControlField, NoiseKind, TimeGrid};

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-14 * a.abs().max(b.abs()).max(1e-300)
}

#[test]
fn field_round_trip_keeps_fifteen_digits() {
    let grid = TimeGrid::new(123.4, 617).unwrap();
    let field = ControlField::from_fn(&grid, |t| (0.37 * t).sin() / (1.0 + t));
    let mut buf = Vec::new();
    write_field(&mut buf, &grid, &field).unwrap();
    let samples = read_field(buf.as_slice()).unwrap();
    let stored = samples.grid().unwrap();
    assert_eq!(stored.n_steps(), 617);
    assert!(close(stored.t_final(), 123.4));
    let back = samples.into_field(&grid).unwrap();
    assert!(back.samples().iter().zip(field.samples()).all(|(a, b)| close(*a, *b)));
}

#[test]
fn field_on_a_mismatched_grid_is_rejected() {
    let grid = TimeGrid::new(10.0, 20).unwrap();
    let mut buf = Vec::new();
    write_field(&mut buf, &grid, &ControlField::constant(&grid, 0.5)).unwrap();
    let other = TimeGrid::new(10.0, 40).unwrap();
    assert!(read_field(buf.as_slice()).unwrap().into_field(&other).is_err());
}

#[test]
fn malformed_field_files_report_a_line() {
    for text in [
        "t_midpoint,value\n0.5,1\n1.5,x\n",
        "t_midpoint,value\n",
        "time,value\n0.5,1\n",
        "t_midpoint,value\n0.5,1\n1.5,inf\n",
        "t_midpoint,value\n-0.5,1\n",
    ] {
        assert!(read_field(text.as_bytes()).is_err(), "{text:?}");
    }
    let uneven = read_field("t_midpoint,value\n0.5,1\n1.5,1\n3.0,1\n".as_bytes()).unwrap();
    assert!(uneven.grid().is_err());
}

#[test]
fn sweep_table_round_trip() {
    let rows = vec![
        SweepRow {
            delta_b: 0.011,
            t_final: 2511.0,
            protocol: Protocol::Ramsey,
            d_hs: 0.1,
            d_tr: 0.316,
            purity1: 0.6,
            purity2: 0.61,
            qfi_over_t: 12.5,
        },
        SweepRow {
            delta_b: 0.011,
            t_final: 2511.0,
            protocol: Protocol::Optimized,
            d_hs: 0.889,
            d_tr: 0.943,
            purity1: 0.99,
            purity2: 0.98,
            qfi_over_t: 250.0,
        },
    ];
    let mut buf = Vec::new();
    write_sweep(&mut buf, &rows).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("delta_b,T,protocol,d_hs,d_tr,purity1,purity2,qfi_over_t\n"));
    assert_eq!(read_sweep(buf.as_slice()).unwrap(), rows);
}

#[test]
fn m_table_and_fit_round_trip() {
    let deltas: Vec<f64> = (0..7).map(|i| 0.002 * 10f64.powf(i as f64 / 6.0)).collect();
    let curve = MCurve::analytic(deltas, 1e-3 / 1.2).unwrap();
    let mut buf = Vec::new();
    write_m_curve(&mut buf, &curve).unwrap();
    let (d, m) = read_m_table(buf.as_slice()).unwrap();
    assert_eq!(d.len(), 7);
    assert!(m.iter().zip(&curve.m_values).all(|(a, b)| close(*a, *b)));

    let fit = fit_effective_time(&MCurve::new(d, m, 1e-3).unwrap(), NoiseKind::Relaxation).unwrap();
    let mut buf = Vec::new();
    write_fits(&mut buf, &[fit]).unwrap();
    let back = read_fits(buf.as_slice()).unwrap();
    assert_eq!(back.len(), 1);
    assert_eq!(back[0].noise_kind, NoiseKind::Relaxation);
    assert!(close(back[0].ratio, fit.ratio));
}

#[test]
fn m_table_columns_are_found_by_name() {
    let text = "m,extra,delta_b\n0.5,x,0.01\n0.25,y,0.02\n";
    let (d, m) = read_m_table(text.as_bytes()).unwrap();
    assert_eq!((d, m), (vec![0.01, 0.02], vec![0.5, 0.25]));
    assert!(read_m_table("delta_b,m\n0.01,1.5\n".as_bytes()).is_err());
    assert!(read_m_table("delta_b,m\n-0.01,0.5\n".as_bytes()).is_err());
}

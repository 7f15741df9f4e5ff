use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use hybrid_assoc::game::{find_equilibrium, staircase_sweep};
use hybrid_assoc::smdp::value_iterate;
use hybrid_assoc::{
    ApServer, GameConfig, HybridCell, NodebServer, Setup, SmdpConfig, UmtsModel, UmtsParams, UmtsTable, WlanModel,
    WlanParams,
};

fn ap_nodeb() -> HybridCell {
    let wlan = WlanModel::new(WlanParams::default());
    let umts = UmtsModel::new(UmtsParams::default(), UmtsTable::builtin()).unwrap();
    HybridCell::new(ApServer::new(&wlan, 18).unwrap(), NodebServer::new(&umts))
}

fn game(lambda_ap3g: f64) -> GameConfig {
    GameConfig::from_wlan(&WlanModel::new(WlanParams::default()), 1e-5, 10, 3.0, lambda_ap3g, 2.5).unwrap()
}

fn smdp(c: &mut Criterion) {
    let cell = ap_nodeb();
    let streams = Setup::ApNodeb.default_streams();
    let config = SmdpConfig::default();
    c.bench_function("value_iterate ap-nodeb 19x18", |b| {
        b.iter(|| value_iterate(black_box(&cell), &streams, &config).unwrap())
    });
}

fn equilibrium(c: &mut Criterion) {
    let config = game(2.0);
    c.bench_function("find_equilibrium M_AP=10", |b| b.iter(|| find_equilibrium(black_box(&config)).unwrap()));
    let grid: Vec<f64> = (0..=40).map(|k| k as f64 * 0.5).collect();
    let base = game(0.0);
    c.bench_function("staircase 41 points", |b| b.iter(|| staircase_sweep(black_box(&base), &grid).unwrap()));
}

fn wlan(c: &mut Criterion) {
    let model = WlanModel::new(WlanParams::default());
    c.bench_function("theta_ap m_c=1..18", |b| {
        b.iter(|| (1..=18).map(|m| model.theta(black_box(m)).unwrap()).sum::<f64>())
    });
}

criterion_group!(benches, smdp, equilibrium, wlan);
criterion_main!(benches);

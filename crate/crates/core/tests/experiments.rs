use sftwave::eval::{morlet_rmse_sweep, MorletMethod, SweepConfig};
use sftwave::kernels::GaussOrder;
use sftwave::smoothers::{BetaChoice, TransformSpec};
use sftwave::Workers;

fn sweep(method: MorletMethod, shift: usize, xis: &[f64]) -> Vec<f64> {
    let cfg = SweepConfig::new(60.0, method, shift).with_xis(xis.to_vec());
    morlet_rmse_sweep(&cfg, Workers::ALL).unwrap().iter().map(|r| r.relative_rmse).collect()
}

#[test]
fn direct_and_multiply_agree_at_xi_10() {
    let d = sweep(MorletMethod::Direct { order_count: 7, first_order: None }, 0, &[10.0])[0];
    let m = sweep(MorletMethod::Multiply { max_order: 3 }, 0, &[10.0])[0];
    assert!(d.max(m) / d.min(m) <= 2.0, "{d} vs {m}");
}

#[test]
fn attenuated_direct_tracks_plain_direct_at_mid_and_high_xi() {
    let xis = [6.0, 10.0, 16.0];
    let method = MorletMethod::Direct { order_count: 7, first_order: None };
    let plain = sweep(method, 0, &xis);
    let shifted = sweep(method, 5, &xis);
    for ((xi, p), s) in xis.iter().zip(&plain).zip(&shifted) {
        assert!(*s <= 1.5 * p, "xi={xi}: {s} vs {p}");
    }
}

#[test]
fn derivative_fits_are_harder() {
    for p in [3, 4, 5] {
        let e: Vec<f64> = [GaussOrder::Smooth, GaussOrder::First, GaussOrder::Second]
            .iter()
            .map(|o| TransformSpec::gaussian(*o, 40.0, Some(120), p, BetaChoice::Tuned, 0).unwrap().kernel_rmse().unwrap())
            .collect();
        assert!(e[0] < e[1] && e[1] < e[2], "P={p}: {e:?}");
    }
}

#[test]
fn direct_fit_near_truncated_morlet_at_xi_10() {
    use sftwave::smoothers::TransformKind;
    let d6 = sweep(MorletMethod::Direct { order_count: 6, first_order: None }, 0, &[10.0])[0];
    let truncated = TransformSpec::truncated(TransformKind::MorletDirect, 60.0, Some(10.0)).unwrap().kernel_rmse().unwrap();
    assert!(d6 <= 1.5 * truncated && truncated <= 1.5 * d6, "{d6} vs {truncated}");
}

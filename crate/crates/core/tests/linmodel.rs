use vimp_core::datagen::{generate, generate_pair, DataSpec};
use vimp_core::importance::model_mse;
use vimp_core::linmodel::{fit, t_statistics};

// t for one coefficient, written out from the inverse-diagonal closed form.
fn t_oracle(delta: f64, p: f64, n: f64, noise: f64) -> f64 {
    (1.0 - delta) * ((n - 1.0) * (1.0 + (p - 1.0) * delta).powi(2)
        / (noise * ((1.0 + (p - 2.0) * delta).powi(2) + (p - 1.0) * delta * delta)))
        .sqrt()
}

#[test]
fn t_oracle_reproduces_reference_values() {
    assert!((t_oracle(0.5, 3.0, 2000.0, 0.1) - 0.5 * (1999.0f64 * 4.0 / (0.1 * 2.75)).sqrt()).abs() < 1e-12);
    assert!((t_oracle(0.5, 3.0, 2000.0, 0.1) - 85.26).abs() < 0.01);
    assert!((t_oracle(0.0, 3.0, 2000.0, 0.1) - 141.39).abs() < 0.01);
}

#[test]
fn coefficients_within_three_standard_errors() {
    let spec = DataSpec::uniform(2000, 3, 0.5, 1.0, 0.1, 21);
    let f = fit(&generate(&spec).unwrap()).unwrap();
    for i in 0..3 {
        let se = (f.resid_var * f.xtx_inv_diag[i]).sqrt();
        let se_closed = (0.1f64 * 2.75 / 1999.0).sqrt();
        assert!((se / se_closed - 1.0).abs() < 0.1, "se {se} vs {se_closed}");
        assert!((f.coef[i] - 1.0).abs() <= 3.0 * se, "coef {} se {se}", f.coef[i]);
    }
}

fn mean_t(delta: f64) -> f64 {
    let mut total = 0.0;
    let mut count = 0;
    for rep in 0..100 {
        let spec = DataSpec::uniform(2000, 3, delta, 1.0, 0.1, 1000 + rep);
        let t = t_statistics(&fit(&generate(&spec).unwrap()).unwrap()).unwrap();
        total += t.sum();
        count += t.len();
    }
    total / count as f64
}

#[test]
fn mean_t_matches_closed_form() {
    for delta in [0.0, 0.5] {
        let expected = t_oracle(delta, 3.0, 2000.0, 0.1);
        let got = mean_t(delta);
        assert!((got / expected - 1.0).abs() < 0.05, "delta {delta}: {got} vs {expected}");
    }
}

#[test]
fn validation_mse_near_noise_variance() {
    let spec = DataSpec::uniform(2000, 6, 0.5, 1.0, 0.1, 33);
    let (train, valid) = generate_pair(&spec).unwrap();
    let mse = model_mse(&fit(&train).unwrap(), &valid).unwrap();
    assert!((mse / 0.1 - 1.0).abs() < 0.1, "mse {mse}");
}

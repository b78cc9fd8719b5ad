use std::f64::consts::PI;

use ctwork::identities::{
    fundamental_equation_residual, laplacian_double_identity, near_orbit_family, run_suite, two_form_equation_residual,
};
use ctwork::la::V4;
use ctwork::triad::GOLDEN;
use ctwork::{CylinderGrid, MapField, Triad};

#[test]
fn perturbed_ellipsoid_instanton_identities() {
    let t = Triad::ellipsoid_perturbed(11, 1.0, GOLDEN);
    let fields = near_orbit_family(&t, V4::new(1.0, 0.0, 0.0, 0.0), PI, &[16, 32, 64], 0.05, 1e-11).unwrap();
    let f = fundamental_equation_residual(&t, &fields).unwrap();
    assert!(f.order.unwrap() >= 1.5, "{f:?}");
    assert!(f.residuals.windows(2).all(|w| w[1] < w[0]));
    let two = two_form_equation_residual(&t, &fields).unwrap();
    assert!(two.pass, "{two:?}");
    let l = laplacian_double_identity(&t, &fields).unwrap();
    assert!(l.pass, "{l:?}");
}

#[test]
fn off_shell_field_gets_warning() {
    let t = Triad::ellipsoid(1.0, GOLDEN);
    let fields: Vec<MapField> = [16usize, 32]
        .iter()
        .map(|&n| {
            let g = CylinderGrid::new(1.0, n + 1, n).unwrap();
            MapField::from_fn(g, &t, |s, th| {
                let a = 2.0 * PI * th;
                V4::new(a.cos(), a.sin(), 0.2 * s, 0.1 * (a + s).sin())
            })
        })
        .collect();
    let f = fundamental_equation_residual(&t, &fields).unwrap();
    assert!(f.notes.iter().any(|n| n.contains("not on shell")), "{:?}", f.notes);
    // The double Laplacian identity rests on J-linearity of ∂^π w only, so it also holds here
    let l = laplacian_double_identity(&t, &fields).unwrap();
    assert!(l.pass);
    // two-form equation holds for every smooth map
    let two = two_form_equation_residual(&t, &fields).unwrap();
    assert!(two.residuals[1] < two.residuals[0]);
}

#[test]
fn suite_csv_shape() {
    let t = Triad::flat();
    let fields = ctwork::identities::flat_oracle_family(&[16, 32], 0.1).unwrap();
    let s = run_suite(&t, &fields, 3).unwrap();
    let csv = s.to_csv();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "identity,n16,n32,order,pass");
    assert_eq!(lines.len(), s.reports.len() + 1);
    assert!(s
        .summary()
        .ends_with(&format!("overall {}\n", if s.all_pass() { "PASS" } else { "FAIL" })));
    let again = run_suite(&t, &fields, 3).unwrap();
    assert_eq!(csv, again.to_csv());
}

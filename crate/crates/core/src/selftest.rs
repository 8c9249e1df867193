//! Built-in oracle checks on procedural meshes.

use rand::{Rng, SeedableRng};

use crate::energy::SdfObjective;
use crate::geometry::Vec3;
use crate::operators::{cotan_laplacian, lumped_mass};
use crate::scalar::dot;
use crate::sdf::{make_quadrature, SdfMesh, SignMode};
use crate::shapes;
use crate::subspace::{compute_modes, ReducedCoords, SubspaceBasis};
use crate::Result;

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SelftestOptions {
    /// Scales the analytic gradient by 1.5 before comparison (negative control).
    pub corrupt_gradient: bool,
}

type Check = fn(SelftestOptions) -> Result<(bool, String)>;

pub fn run(options: SelftestOptions) -> Vec<CheckResult> {
    let checks: [(&'static str, Check); 4] = [
        ("reduced gradient vs central differences", gradient_check),
        ("eigen residual, dense path", |_| eigen_check(2)),
        ("eigen residual, shift-invert path", |_| eigen_check(3)),
        ("tree vs brute-force signed distance", |_| sdf_check()),
    ];
    checks
        .iter()
        .map(|(name, f)| match f(options) {
            Ok((passed, detail)) => CheckResult { name, passed, detail },
            Err(e) => CheckResult {
                name,
                passed: false,
                detail: format!("error: {e}"),
            },
        })
        .collect()
}

fn gradient_check(options: SelftestOptions) -> Result<(bool, String)> {
    let source = shapes::icosphere::<f64>(2, 1.0);
    let target = source.map_vertices(|p| Vec3::new(1.2 * p.x + 0.1, p.y, 0.85 * p.z));
    let quad = make_quadrature(&source, &target, [10, 10, 10], 0.05, SignMode::Pseudonormal)?;
    let l = cotan_laplacian(&source)?;
    let m = lumped_mass(&source)?;
    let basis = SubspaceBasis::new(compute_modes(&l, &m, 4)?, &source)?;
    let x0 = source.vectorize();
    let mut obj = SdfObjective::new(source.triangles(), &quad);
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2024);
    let h = 1e-6 * quad.bounds().diagonal();
    let mut worst = 0.0f64;
    let mut done = 0;
    let mut attempts = 0;
    while done < 5 && attempts < 50 {
        attempts += 1;
        let z = ReducedCoords((0..48).map(|_| rng.gen_range(-0.05..0.05)).collect());
        let dz: Vec<f64> = (0..48).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let x = basis.reconstruct(&z, &x0)?;
        let base = obj.energy_gradient(&x)?;
        let mut gz = basis.project_gradient(base.grad_x.as_ref().expect("gradient"), 4)?;
        if options.corrupt_gradient {
            gz.iter_mut().for_each(|g| *g *= 1.5);
        }
        let at = |s: f64| ReducedCoords(z.iter().zip(&dz).map(|(a, b)| a + s * b).collect());
        let ep = obj.energy(&basis.reconstruct(&at(h), &x0)?)?;
        let em = obj.energy(&basis.reconstruct(&at(-h), &x0)?)?;
        if ep.closest != base.closest || em.closest != base.closest {
            continue;
        }
        let fd = (ep.energy - em.energy) / (2.0 * h);
        let an = dot(&gz, &dz);
        worst = worst.max((fd - an).abs() / fd.abs().max(an.abs()).max(1e-300));
        done += 1;
    }
    Ok((done == 5 && worst < 1e-4, format!("{done} trials, worst relative error {worst:.2e}")))
}

fn eigen_check(subdivisions: usize) -> Result<(bool, String)> {
    let mesh = shapes::icosphere::<f64>(subdivisions, 1.0);
    let l = cotan_laplacian(&mesh)?;
    let m = lumped_mass(&mesh)?;
    let modes = compute_modes(&l, &m, 16)?;
    let (res, lw) = modes.residual(&l, &m);
    let rel = res / lw.max(1.0);
    let orth = modes.orthonormality_error(&m);
    let ok = rel <= 1e-8 && orth <= 1e-8;
    Ok((ok, format!("n={}, residual {rel:.2e}, orthonormality {orth:.2e}", mesh.vertex_count())))
}

fn sdf_check() -> Result<(bool, String)> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(77);
    let mut mismatches = 0;
    for mesh in [shapes::icosphere::<f64>(2, 1.0), shapes::open_box(1.0, 6)] {
        let sdf = SdfMesh::new(&mesh);
        for _ in 0..300 {
            let q = Vec3::new(rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5), rng.gen_range(-1.5..1.5));
            let a = sdf.query(q, SignMode::Pseudonormal, None);
            let b = sdf.query_brute_force(q, SignMode::Pseudonormal);
            if a.sign != b.sign || (a.distance - b.distance).abs() > 1e-12 {
                mismatches += 1;
            }
        }
    }
    Ok((mismatches == 0, format!("600 points, {mismatches} mismatches")))
}

/// Fixed-width pass/fail table.
pub fn format_table(results: &[CheckResult]) -> String {
    let mut s = String::new();
    for r in results {
        s.push_str(&format!(
            "[{}] {:<42} {}\n",
            if r.passed { "PASS" } else { "FAIL" },
            r.name,
            r.detail
        ));
    }
    s
}

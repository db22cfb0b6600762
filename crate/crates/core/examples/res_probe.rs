// scratch: decompose the worst eigenpair residual of the large chain
use num_complex::Complex64;
use viscopt::csymdpr1::*;
use viscopt::model::*;
use viscopt::optimize::*;

fn main() {
    let sys = build_two_row_oscillator(800, 100.0, 150.0, 200.0, MassProfile::PaperLarge).unwrap();
    let internal = InternalDampingModel::CriticalProportional { alpha: 0.02 };
    let prep = PreparedSystem::new(&sys, &internal).unwrap();
    let specs = vec![
        DamperSpec::Grounded { index: 50 },
        DamperSpec::Grounded { index: 950 },
        DamperSpec::Connecting { index: 220, partner: 620 },
    ];
    let prob = prep.problem(&specs, 27, OptimizerSettings::default()).unwrap();
    let split = prob.split().unwrap();
    let rhos = [721.1, 656.5, 415.4];
    let mut cur_xi = split.xi_core.clone();
    let mut s_acc: Option<viscopt::cauchy::CauchyLike> = None;
    for (step, (rho, y)) in rhos.iter().zip(&split.ys_core).enumerate() {
        let mut y_eff = match &s_acc {
            None => y.clone(),
            Some(s) => s.tr_matvec(y),
        };
        let norm = y_eff.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        let floor = 1e-6 * norm;
        for z in y_eff.iter_mut() {
            let m = z.norm();
            if m < floor {
                *z = if m > floor * 1e-9 { *z * (floor / m) } else { Complex64::new(floor, 0.0) };
            }
        }
        let m = CSymDpr1::new(cur_xi.clone(), y_eff.clone(), *rho).unwrap();
        let e = eig_all(&m).unwrap();
        let v = eigvector_generators(&m, &e).unwrap();
        let n = m.dim();
        let norm_a = {
            let rho = m.rho();
            let y4: f64 = m.y().iter().map(|z| z.norm_sqr() * z.norm_sqr()).sum();
            let y2: f64 = m.y().iter().map(|z| z.norm_sqr()).sum();
            let mut t = rho * rho * (y2 * y2 - y4);
            for (&xi, &yi) in m.xi().iter().zip(m.y()) {
                t += (xi + rho * yi * yi).norm_sqr();
            }
            t.sqrt()
        };
        let mut worst = (0usize, 0.0f64);
        let mut col = vec![Complex64::new(0.0, 0.0); n];
        for j in (0..n).step_by(31) {
            v.expand_col(j, &mut col);
            let nrm = col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
            let av = m.matvec(&col);
            let res: f64 = av.iter().zip(&col).map(|(a, u)| (a - e.lambda[j] * u).norm_sqr()).sum::<f64>().sqrt();
            let rel = res / (nrm * norm_a);
            if rel > worst.1 {
                worst = (j, rel);
            }
        }
        let j = worst.0;
        let lam = e.lambda[j];
        let (near, gap) = m.xi().iter().enumerate()
            .map(|(i, x)| (i, (x - lam).norm()))
            .min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        let f = secular_eval(&m, lam).map(|v| v.norm());
        println!(
            "step {step}: worst col {j}: rel res {:.3e}; lambda {lam}; nearest node {near} gap {gap:.3e}, |y_near| {:.3e} (rel {:.3e}); |f| {f:?}; psi {:.3e}; ||A||_F {norm_a:.3e}; iters {}",
            worst.1,
            y_eff[near].norm(),
            y_eff[near].norm() / norm,
            e.psi[j].norm(),
            e.provenance[j].iters
        );
        s_acc = Some(match s_acc {
            None => v,
            Some(s) => viscopt::cauchy::linked_product(&s, &v).unwrap(),
        });
        cur_xi = e.lambda;
    }
}

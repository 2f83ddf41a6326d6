use vpest::geometry::*;
use vpest::solvers::*;
use vpest::synthetic::*;

fn main() {
    let cfg = SyntheticConfig { lines_per_direction: 1, ..Default::default() };
    let mut rng = derive_rng(1000, 5);
    for run in 0..500 {
        let inst = generate_minimal_sample(SolverId::S211, &cfg, &mut rng).unwrap();
        if run != 468 { continue; }
        let l = &inst.sample.lines;
        let (l1, l2, l3, l4) = (&l[0], &l[1], &l[2], &l[3]);
        let v1 = l1.coeffs().cross(&l2.coeffs()).normalize();
        let s = l3.a() * l4.a() + l3.b() * l4.b();
        let p = v1.x * v1.x + v1.y * v1.y;
        let q = v1.z * v1.z;
        let cc = l3.c() * l4.c();
        let t3 = l3.coeffs().dot(&v1);
        let t4 = l4.coeffs().dot(&v1);
        let alpha = s * q;
        let beta = s * p + cc * q - t3 * t4;
        let gamma = cc * p;
        let f_gt: f64 = inst.gt_frame.focal();
        println!("f_gt {}", f_gt);
        println!("alpha {alpha:e} beta {beta:e} gamma {gamma:e}");
        println!("disc {:e}", beta*beta - 4.0*alpha*gamma);
        println!("eval at f_gt^2: {:e}", alpha*f_gt.powi(4) + beta*f_gt.powi(2) + gamma);
        // normalized eval
        let scale = alpha.abs().max(beta.abs()).max(gamma.abs());
        println!("normalized eval {:e}", (alpha*f_gt.powi(4) + beta*f_gt.powi(2) + gamma)/scale/f_gt.powi(2));
        println!("v1 = {:?}, v1.z {:e}", v1, v1.z);
        println!("result: {:?}", solve_211(l1, l2, l3, l4).map(|fs| fs.iter().map(|f| f.focal()).collect::<Vec<_>>()));
    }
}

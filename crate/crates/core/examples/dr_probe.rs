use despca::linalg::{project_fantope, sample_covariance, soft_threshold_matrix, symmetric_eigen, SymmetricMatrix};
use despca::spiked::{model_2, sample_gaussian};

fn main() {
    let m = model_2(15).unwrap();
    let x = sample_gaussian(&m, 50, 3).unwrap();
    let s = sample_covariance(&x).unwrap();
    let lambda = 0.4;
    let p = s.dim();
    let eig = symmetric_eigen(&s).unwrap();
    let mut w0 = vec![0.0; p];
    w0[0] = 1.0;
    let mut z = eig.reassemble_with(&w0);
    let mut y = z.clone();
    let mut dual = SymmetricMatrix::zeros(p);
    let s_over = s.clone();
    let mut prev: Option<(SymmetricMatrix, SymmetricMatrix)> = None;
    let mut last = [f64::INFINITY; 3];
    let mut viol = [0usize; 3];
    let mut worst = [0.0f64; 3];
    for it in 0..1500 {
        let zin = y.add_scaled(&dual, -1.0).add_scaled(&s_over, 1.0);
        z = project_fantope(&zin).unwrap();
        let yin = z.add_scaled(&dual, 1.0);
        let y_next = soft_threshold_matrix(&yin, lambda);
        let gap = z.add_scaled(&y_next, -1.0);
        dual = dual.add_scaled(&gap, 1.0);
        let y_prev = y.clone();
        y = y_next;
        if let Some((py, pw)) = &prev {
            // candidates: (a) combined, (b) Y - W, (c) Y + W
            let dy = y.add_scaled(py, -1.0).frobenius_norm_sq();
            let dw = dual.add_scaled(pw, -1.0).frobenius_norm_sq();
            let da = (dy + dw).sqrt();
            let zeta_b = y.add_scaled(&dual, -1.0).add_scaled(&py.add_scaled(pw, -1.0), -1.0).frobenius_norm();
            let zeta_c = y.add_scaled(&dual, 1.0).add_scaled(&py.add_scaled(pw, 1.0), -1.0).frobenius_norm();
            for (i, d) in [da, zeta_b, zeta_c].into_iter().enumerate() {
                if it > 2 && d > last[i] + 1e-12 {
                    viol[i] += 1;
                    if d - last[i] > worst[i] { worst[i] = d - last[i]; }
                }
                last[i] = d;
            }
        }
        prev = Some((y.clone(), dual.clone()));
        let _ = y_prev;
    }
    println!("violations over 1500 iters: combined={} (worst {:.2e}), Y-W={} (worst {:.2e}), Y+W={} (worst {:.2e})",
        viol[0], worst[0], viol[1], worst[1], viol[2], worst[2]);
}

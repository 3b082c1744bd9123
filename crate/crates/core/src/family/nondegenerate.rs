use super::FamilySpec;
use crate::cvec::{CMat, CVec, C64, ZERO};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const STARTS: usize = 200;
const RESIDUAL: f64 = 1e-10;

#[derive(Clone, Debug)]
pub struct NondegeneracyReport {
    pub nondegenerate: bool,
    /// Unit vector where all lifted coordinates (nearly) vanish.
    pub witness: Option<CVec>,
    pub min_residual: f64,
    pub starts: usize,
}

/// Probabilistic search for a common zero of the `k+1` lifted forms on the
/// unit sphere: Gauss–Newton in the chart of the largest coordinate, from
/// `STARTS` seeded random starts. A miss does not prove non-degeneracy.
pub fn check_nondegenerate(spec: &FamilySpec, lambda: C64, seed: u64) -> NondegeneracyReport {
    let lift = spec.at(lambda);
    let n = spec.k() + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    let mut witness = None;
    for _ in 0..STARTS {
        let mut z = CVec::zeros(n);
        for i in 0..n {
            z[i] = C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5);
        }
        let chart = (0..n).max_by(|&a, &b| z[a].norm().total_cmp(&z[b].norm())).unwrap();
        z = z.scale(z[chart].inv());
        for _ in 0..60 {
            let (f, df) = lift.eval_with_jacobian(&z);
            // J: (k+1) x k, columns are the free coordinates
            let free: Vec<usize> = (0..n).filter(|&j| j != chart).collect();
            let k = free.len();
            let mut normal = CMat::zeros(k);
            let mut rhs = CVec::zeros(k);
            for (a, &ja) in free.iter().enumerate() {
                let mut s = ZERO;
                for i in 0..n {
                    s += df.get(i, ja).conj() * f[i];
                }
                rhs[a] = -s;
                for (b, &jb) in free.iter().enumerate() {
                    let mut m = ZERO;
                    for i in 0..n {
                        m += df.get(i, ja).conj() * df.get(i, jb);
                    }
                    normal.set(a, b, m);
                }
            }
            let Some(step) = normal.solve(&rhs) else { break };
            if !step.is_finite() {
                break;
            }
            for (a, &ja) in free.iter().enumerate() {
                z[ja] += step[a];
            }
            if step.norm() < 1e-15 * z.norm() {
                break;
            }
        }
        if !z.is_finite() {
            continue;
        }
        let u = z.scale_re(1.0 / z.norm());
        let r = lift.eval(&u).norm();
        if r < best {
            best = r;
            witness = Some(u);
        }
    }
    let nondegenerate = best > RESIDUAL;
    NondegeneracyReport { nondegenerate, witness: if nondegenerate { None } else { witness }, min_residual: best, starts: STARTS }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::family::{degenerate_example, skew_lift_generic, square_map_p1};
    use crate::family::ProjPoint;
    use crate::cvec::ONE;

    #[test]
    fn square_map_is_nondegenerate() {
        assert!(check_nondegenerate(&square_map_p1(), ZERO, 1).nondegenerate);
    }

    #[test]
    fn xy_y2_is_degenerate_at_1_0() {
        let r = check_nondegenerate(&degenerate_example(), ZERO, 1);
        assert!(!r.nondegenerate);
        let w = ProjPoint::new(&r.witness.unwrap()).unwrap();
        let e = ProjPoint::new(&CVec::two(ONE, ZERO)).unwrap();
        assert!(w.chordal_distance(&e) < 1e-6);
    }

    #[test]
    fn skew_lift_at_one_is_nondegenerate() {
        assert!(check_nondegenerate(&skew_lift_generic(), ONE, 3).nondegenerate);
    }
}

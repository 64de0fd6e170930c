use num_traits::Float;

/// Solves `A β = b` for symmetric positive semi-definite `A` (row-major,
/// `k × k`) by Cholesky factorization. Directions with a vanishing pivot are
/// dropped and their coefficient set to zero, which still yields a solution
/// of the normal equations restricted to the remaining variables.
pub(crate) fn solve_psd<T: Float>(a: &[T], b: &[T], k: usize) -> Vec<T> {
    debug_assert_eq!(a.len(), k * k);
    let scale = (0..k).map(|i| a[i * k + i].abs()).fold(T::zero(), T::max).max(T::one());
    let tol = scale * T::epsilon() * T::from(1e3).unwrap();
    let mut l = vec![T::zero(); k * k];
    let mut kept = vec![true; k];
    for j in 0..k {
        let mut d = a[j * k + j];
        for p in 0..j {
            d = d - l[j * k + p] * l[j * k + p];
        }
        if d <= tol {
            kept[j] = false;
            continue;
        }
        let djj = d.sqrt();
        l[j * k + j] = djj;
        for i in j + 1..k {
            let mut s = a[i * k + j];
            for p in 0..j {
                s = s - l[i * k + p] * l[j * k + p];
            }
            l[i * k + j] = s / djj;
        }
    }
    // forward: L z = b
    let mut z = vec![T::zero(); k];
    for i in 0..k {
        if !kept[i] {
            continue;
        }
        let mut s = b[i];
        for p in 0..i {
            s = s - l[i * k + p] * z[p];
        }
        z[i] = s / l[i * k + i];
    }
    // backward: Lᵀ β = z
    let mut beta = vec![T::zero(); k];
    for i in (0..k).rev() {
        if !kept[i] {
            continue;
        }
        let mut s = z[i];
        for p in i + 1..k {
            s = s - l[p * k + i] * beta[p];
        }
        beta[i] = s / l[i * k + i];
    }
    beta
}

//! Permutation utilities: signed enumeration, unshuffles, and the
//! front-block inversion count used by the mixed symmetrizer signs.

/// A permutation of `{1, ..., n}` together with its parity.
///
/// `sigma[i]` is the (1-based) image of `i + 1`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignedPermutation {
    pub sigma: Vec<usize>,
    pub sign: i32,
}

impl SignedPermutation {
    pub fn identity(n: usize) -> Self {
        SignedPermutation {
            sigma: (1..=n).collect(),
            sign: 1,
        }
    }

    pub fn from_images(sigma: Vec<usize>) -> Self {
        let sign = parity_from_inversions(&sigma);
        SignedPermutation { sigma, sign }
    }

    /// Image of `i` (1-based).
    pub fn apply(&self, i: usize) -> usize {
        self.sigma[i - 1]
    }

    pub fn inverse(&self) -> SignedPermutation {
        let n = self.sigma.len();
        let mut inv = vec![0usize; n];
        for (i, &img) in self.sigma.iter().enumerate() {
            inv[img - 1] = i + 1;
        }
        SignedPermutation {
            sigma: inv,
            sign: self.sign,
        }
    }
}

/// Sign from the inversion count of a 1-based image list.
pub fn parity_from_inversions(sigma: &[usize]) -> i32 {
    let mut inv = 0usize;
    for i in 0..sigma.len() {
        for j in i + 1..sigma.len() {
            if sigma[i] > sigma[j] {
                inv += 1;
            }
        }
    }
    if inv % 2 == 0 {
        1
    } else {
        -1
    }
}

/// All permutations of `{1..n}` with signs. Enumeration uses Heap's
/// algorithm, so consecutive entries differ by one transposition and the
/// sign is maintained incrementally rather than recounted.
pub fn permutations_signed(n: usize) -> Vec<SignedPermutation> {
    let mut out = Vec::with_capacity((1..=n).product::<usize>().max(1));
    let mut a: Vec<usize> = (1..=n).collect();
    let mut c = vec![0usize; n];
    let mut sign = 1i32;
    out.push(SignedPermutation {
        sigma: a.clone(),
        sign,
    });
    let mut i = 0usize;
    while i < n {
        if c[i] < i {
            if i % 2 == 0 {
                a.swap(0, i);
            } else {
                a.swap(c[i], i);
            }
            sign = -sign;
            out.push(SignedPermutation {
                sigma: a.clone(),
                sign,
            });
            c[i] += 1;
            i = 0;
        } else {
            c[i] = 0;
            i += 1;
        }
    }
    out
}

/// All `(p, q)`-unshuffles of `{1..p+q}`: permutations increasing on the
/// first `p` positions and on the last `q` positions. There are
/// `binomial(p + q, p)` of them.
pub fn unshuffles(p: usize, q: usize) -> Vec<SignedPermutation> {
    let n = p + q;
    if p == 0 || q == 0 {
        return vec![SignedPermutation::identity(n)];
    }
    let mut out = Vec::new();
    // Choose which source values land in the first block, in lexicographic
    // order over p-combinations of {1..n}.
    let mut idx: Vec<usize> = (1..=p).collect();
    loop {
        let second: Vec<usize> = (1..=n).filter(|x| !idx.contains(x)).collect();
        let mut sigma = idx.clone();
        sigma.extend_from_slice(&second);
        out.push(SignedPermutation::from_images(sigma));
        let mut i = p;
        while i > 0 && idx[i - 1] == n - (p - i) {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        idx[i - 1] += 1;
        for j in i..p {
            idx[j] = idx[j - 1] + 1;
        }
    }
    out
}

/// Number of inversions of `sigma^{-1}` among the first `k` values:
/// pairs `i < j <= k` whose preimages appear out of order.
pub fn epsilon_count(sigma: &SignedPermutation, k: usize) -> usize {
    let inv = sigma.inverse();
    let mut count = 0usize;
    for i in 1..=k {
        for j in i + 1..=k {
            if inv.apply(i) > inv.apply(j) {
                count += 1;
            }
        }
    }
    count
}

/// `(-1)^{epsilon_count}`.
pub fn epsilon_sign(sigma: &SignedPermutation, k: usize) -> i32 {
    if epsilon_count(sigma, k) % 2 == 0 {
        1
    } else {
        -1
    }
}

/// Distinct rearrangements of a weakly increasing index list.
pub fn multiset_permutations(sorted: &[usize]) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = sorted.to_vec();
    loop {
        out.push(cur.clone());
        // next_permutation
        if cur.len() < 2 {
            break;
        }
        let mut i = cur.len() - 1;
        while i > 0 && cur[i - 1] >= cur[i] {
            i -= 1;
        }
        if i == 0 {
            break;
        }
        let mut j = cur.len() - 1;
        while cur[j] <= cur[i - 1] {
            j -= 1;
        }
        cur.swap(i - 1, j);
        cur[i..].reverse();
    }
    out
}

/// Sort an index list counting swaps; returns `None` if two entries collide
/// (useful for alternating indices, where a repeat kills the term).
pub fn sort_alternating(indices: &[usize]) -> Option<(Vec<usize>, i32)> {
    let mut v = indices.to_vec();
    let mut sign = 1i32;
    // Insertion sort keeps the swap count exact for short lists.
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    for w in v.windows(2) {
        if w[0] == w[1] {
            return None;
        }
    }
    Some((v, sign))
}

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut num = 1usize;
    for i in 0..k {
        num = num * (n - i) / (i + 1);
    }
    num
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heap_signs_match_inversion_parity() {
        for n in 0..=5 {
            let perms = permutations_signed(n);
            let expected: usize = (1..=n).product::<usize>().max(1);
            assert_eq!(perms.len(), expected);
            for p in &perms {
                assert_eq!(p.sign, parity_from_inversions(&p.sigma), "{:?}", p.sigma);
            }
        }
    }

    #[test]
    fn unshuffle_counts() {
        for p in 0..=4 {
            for q in 0..=4 {
                let u = unshuffles(p, q);
                assert_eq!(u.len(), binomial(p + q, p), "p={p} q={q}");
                for s in &u {
                    assert!(s.sigma[..p].windows(2).all(|w| w[0] < w[1]));
                    assert!(s.sigma[p..].windows(2).all(|w| w[0] < w[1]));
                }
            }
        }
    }

    #[test]
    fn unshuffle_2_1_signs() {
        let u = unshuffles(2, 1);
        let got: Vec<(Vec<usize>, i32)> = u.into_iter().map(|s| (s.sigma, s.sign)).collect();
        assert_eq!(
            got,
            vec![
                (vec![1, 2, 3], 1),
                (vec![1, 3, 2], -1),
                (vec![2, 3, 1], 1),
            ]
        );
    }

    #[test]
    fn epsilon_sign_swap_case() {
        // For the transposition of {1,2} the two front values appear
        // reversed, giving one inversion.
        let swap = SignedPermutation::from_images(vec![2, 1]);
        assert_eq!(epsilon_count(&swap, 2), 1);
        assert_eq!(epsilon_sign(&swap, 2), -1);
        let id = SignedPermutation::identity(2);
        assert_eq!(epsilon_sign(&id, 2), 1);
    }

    #[test]
    fn epsilon_ignores_back_block() {
        // sigma = (1 3 2) on {1,2,3}: values 1,2 keep their relative order.
        let s = SignedPermutation::from_images(vec![1, 3, 2]);
        assert_eq!(epsilon_count(&s, 2), 0);
        assert_eq!(epsilon_count(&s, 3), 1);
    }

    #[test]
    fn multiset_perms() {
        let ms = multiset_permutations(&[1, 1, 2]);
        assert_eq!(ms, vec![vec![1, 1, 2], vec![1, 2, 1], vec![2, 1, 1]]);
        assert_eq!(multiset_permutations(&[3]), vec![vec![3]]);
    }

    #[test]
    fn sort_alternating_signs() {
        assert_eq!(sort_alternating(&[2, 1]), Some((vec![1, 2], -1)));
        assert_eq!(sort_alternating(&[3, 1, 2]), Some((vec![1, 2, 3], 1)));
        assert_eq!(sort_alternating(&[1, 1]), None);
    }
}

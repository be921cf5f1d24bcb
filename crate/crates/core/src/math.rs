use crate::label::NUM_CLASSES;

/// Numerically stable softmax over the three class scores.
pub fn softmax3(scores: &[f64; NUM_CLASSES]) -> [f64; NUM_CLASSES] {
    let m = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let e = [
        (scores[0] - m).exp(),
        (scores[1] - m).exp(),
        (scores[2] - m).exp(),
    ];
    let z = e[0] + e[1] + e[2];
    [e[0] / z, e[1] / z, e[2] / z]
}

/// `-ln p[label]` with the probability floored to avoid infinities.
pub fn neg_log(p: f64) -> f64 {
    -p.max(1e-300).ln()
}

pub fn mean(xs: &[f64]) -> f64 {
    if xs.is_empty() {
        return 0.0;
    }
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Population standard deviation.
pub fn std_dev(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / xs.len() as f64).sqrt()
}

//! Reference per-pair target topics and recall cells, used to check the
//! recall arithmetic end to end.

pub const LIBERAL: [&str; 3] = ["CNN", "Huff", "NYT"];
pub const CONSERVATIVE: [&str; 3] = ["Fox", "Breit", "NYP"];
pub const METHODS: [&str; 4] = ["LOE", "PaCTE-noFT", "PaCTE-PLS", "PaCTE"];

/// Top-3 ground-truth topics, `[liberal][conservative]`.
pub const TARGETS: [[[usize; 3]; 3]; 3] = [
    [[1, 9, 10], [9, 1, 11], [9, 10, 2]],
    [[10, 1, 8], [1, 11, 9], [10, 12, 30]],
    [[10, 33, 1], [11, 1, 33], [11, 9, 10]],
];

/// Recall hits out of 3, `[liberal][conservative][method]`.
pub const HITS: [[[usize; 4]; 3]; 3] = [
    [[1, 0, 0, 1], [1, 0, 1, 1], [0, 1, 1, 2]],
    [[1, 1, 1, 2], [2, 0, 1, 1], [0, 0, 1, 2]],
    [[1, 0, 1, 3], [1, 0, 1, 1], [0, 1, 0, 1]],
];

/// Every topic that appears in some target, plus two never-targeted ones.
pub fn labeled_topics() -> Vec<usize> {
    let mut all: Vec<usize> = TARGETS.iter().flatten().flatten().copied().collect();
    all.extend([40, 41]);
    all.sort_unstable();
    all.dedup();
    all
}

/// Ground-truth ranking whose top 3 is `target`.
pub fn ranking_for(target: &[usize; 3]) -> Vec<usize> {
    let mut ranking = target.to_vec();
    ranking.extend(labeled_topics().into_iter().filter(|t| !target.contains(t)));
    ranking
}

/// A prediction over all labeled topics with exactly `hits` target topics
/// in its top 3, preceded by an unlabeled topic that must be skipped.
pub fn crafted_prediction(target: &[usize; 3], hits: usize) -> Vec<usize> {
    let others: Vec<usize> = labeled_topics()
        .into_iter()
        .filter(|t| !target.contains(t))
        .collect();
    let mut pred = vec![999];
    pred.extend(&target[..hits]);
    pred.extend(&others[..3 - hits]);
    pred.extend(&target[hits..]);
    pred.extend(&others[3 - hits..]);
    pred
}

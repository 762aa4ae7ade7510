use crate::circuit::Metrics;

/// Partitions `items` into Pareto fronts on (area, delay), both minimized.
///
/// Front 0 holds the non-dominated items; front `k` is what is
/// non-dominated once fronts `< k` are removed. Within a front, indices are
/// ordered by ascending area, then ascending delay, then position in
/// `items`.
pub fn non_dominated_sort(items: &[Metrics]) -> Vec<Vec<usize>> {
    let m = items.len();
    let mut dominated_by_count = vec![0usize; m];
    let mut dominates: Vec<Vec<usize>> = vec![Vec::new(); m];
    for i in 0..m {
        for j in i + 1..m {
            if items[i].dominates(&items[j]) {
                dominates[i].push(j);
                dominated_by_count[j] += 1;
            } else if items[j].dominates(&items[i]) {
                dominates[j].push(i);
                dominated_by_count[i] += 1;
            }
        }
    }

    let mut fronts = Vec::new();
    let mut current: Vec<usize> = (0..m).filter(|&i| dominated_by_count[i] == 0).collect();
    while !current.is_empty() {
        let mut next = Vec::new();
        for &i in &current {
            for &j in &dominates[i] {
                dominated_by_count[j] -= 1;
                if dominated_by_count[j] == 0 {
                    next.push(j);
                }
            }
        }
        current.sort_by_key(|&i| (items[i].area, items[i].delay, i));
        fronts.push(current);
        current = next;
    }
    fronts
}

/// Area of objective space dominated by `front` and bounded by `reference`.
/// Points at or beyond the reference contribute nothing.
pub fn hypervolume(front: &[Metrics], reference: Metrics) -> f64 {
    let mut pts: Vec<(usize, u32)> = front
        .iter()
        .filter(|m| m.area < reference.area && m.delay < reference.delay)
        .map(|m| (m.area, m.delay))
        .collect();
    pts.sort();
    let mut volume = 0.0;
    let mut ceiling = reference.delay;
    for (area, delay) in pts {
        if delay < ceiling {
            volume += (reference.area - area) as f64 * f64::from(ceiling - delay);
            ceiling = delay;
        }
    }
    volume
}

use super::{LocalView, Proposal};

/// Line formation: a branching node merges two of its branches.
///
/// With a leaf neighbor available the lowest leaf absorbs another branch
/// (the next leaf if there is one), which removes a branch at this node
/// without creating one elsewhere. Otherwise the node passes a branch to a
/// neighbor, skipping the neighbor it last received a branch from so that
/// branches drift outward instead of bouncing back.
pub fn line_rule(view: &LocalView) -> Option<Proposal> {
    if view.degree() < 3 || view.neighbor_ids.iter().any(|&v| view.role(v).is_busy()) {
        return None;
    }
    let leaves: Vec<_> = view
        .neighbor_ids
        .iter()
        .copied()
        .filter(|&v| view.neighbor_degree(v) == 1)
        .collect();
    if let Some(&to) = leaves.first() {
        let branch = match leaves.get(1) {
            Some(&second) => second,
            None => *view.neighbor_ids.iter().find(|&&v| v != to)?,
        };
        return Some(Proposal::Transfer { branch, to });
    }
    let inward = view.inward.filter(|v| view.neighbor_ids.contains(v));
    let mut candidates = view.neighbor_ids.iter().copied().filter(|&v| Some(v) != inward);
    let to = candidates.next()?;
    let branch = candidates.next()?;
    Some(Proposal::Transfer { branch, to })
}

/// Star formation: a non-leaf defers to its best-scoring neighbor when that
/// neighbor outranks it, becoming its leaf. Local maxima stay put.
pub fn star_rule(view: &LocalView) -> Option<Proposal> {
    if view.degree() < 2 || view.neighbor_ids.iter().any(|&v| view.role(v).is_busy()) {
        return None;
    }
    let best = view.neighbor_ids.iter().copied().max_by_key(|&v| view.neighbor_score(v))?;
    (view.neighbor_score(best) > view.score()).then_some(Proposal::Leafize { toward: best })
}

//! Breadth-first reachability on small directed graphs.

use std::collections::VecDeque;

/// For every node, whether it can reach some `target` node along the directed
/// edges `successors[i]`. Targets reach themselves.
pub fn can_reach_targets(successors: &[Vec<usize>], targets: &[bool]) -> Vec<bool> {
    let n = successors.len();
    let mut predecessors = vec![Vec::new(); n];
    for (i, succ) in successors.iter().enumerate() {
        for &j in succ {
            predecessors[j].push(i);
        }
    }
    let mut reached = targets.to_vec();
    let mut queue: VecDeque<usize> = (0..n).filter(|&i| targets[i]).collect();
    while let Some(j) = queue.pop_front() {
        for &i in &predecessors[j] {
            if !reached[i] {
                reached[i] = true;
                queue.push_back(i);
            }
        }
    }
    reached
}

/// Whether every node reaches every other node.
pub fn strongly_connected(successors: &[Vec<usize>]) -> bool {
    let n = successors.len();
    if n == 0 {
        return true;
    }
    let mut root = vec![false; n];
    root[0] = true;
    // all nodes reach 0, and 0 reaches all nodes
    if !can_reach_targets(successors, &root).iter().all(|&r| r) {
        return false;
    }
    let mut reversed = vec![Vec::new(); n];
    for (i, succ) in successors.iter().enumerate() {
        for &j in succ {
            reversed[j].push(i);
        }
    }
    can_reach_targets(&reversed, &root).iter().all(|&r| r)
}

//! Maximum bipartite matching (Hopcroft–Karp).

use std::collections::VecDeque;

const NIL: usize = usize::MAX;

/// Size of a maximum matching; `adj[i]` lists the right vertices adjacent to
/// left vertex `i`, and right vertices are `0..right`.
pub fn max_matching(adj: &[Vec<usize>], right: usize) -> usize {
    let left = adj.len();
    let mut match_l = vec![NIL; left];
    let mut match_r = vec![NIL; right];
    let mut dist = vec![0usize; left];
    let mut size = 0;
    loop {
        // Layer the free left vertices and everything reachable by
        // alternating paths.
        let mut queue = VecDeque::new();
        for i in 0..left {
            if match_l[i] == NIL {
                dist[i] = 0;
                queue.push_back(i);
            } else {
                dist[i] = usize::MAX;
            }
        }
        let mut found = false;
        while let Some(i) = queue.pop_front() {
            for &j in &adj[i] {
                let k = match_r[j];
                if k == NIL {
                    found = true;
                } else if dist[k] == usize::MAX {
                    dist[k] = dist[i] + 1;
                    queue.push_back(k);
                }
            }
        }
        if !found {
            return size;
        }
        let mut next = vec![0usize; left];
        for i in 0..left {
            if match_l[i] == NIL
                && augment(i, adj, &mut match_l, &mut match_r, &mut dist, &mut next)
            {
                size += 1;
            }
        }
    }
}

fn augment(
    i: usize,
    adj: &[Vec<usize>],
    match_l: &mut [usize],
    match_r: &mut [usize],
    dist: &mut [usize],
    next: &mut [usize],
) -> bool {
    // Iterative DFS along the layered graph.
    let mut stack = vec![i];
    while let Some(&u) = stack.last() {
        if next[u] == adj[u].len() {
            dist[u] = usize::MAX;
            stack.pop();
            continue;
        }
        let j = adj[u][next[u]];
        next[u] += 1;
        let k = match_r[j];
        if k == NIL {
            // Flip the alternating path recorded on the stack.
            let mut j = j;
            while let Some(u) = stack.pop() {
                let prev = match_l[u];
                match_l[u] = j;
                match_r[j] = u;
                j = prev;
            }
            return true;
        }
        if dist[k] == dist[u] + 1 {
            stack.push(k);
        }
    }
    false
}

//! Strongly connected components and condensation order for small directed
//! graphs given as adjacency lists over `0..n`.

/// Tarjan's algorithm, iterative to keep recursion depth independent of the
/// graph. Components are returned in reverse topological order of the
/// condensation (successors first).
pub fn tarjan_scc(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let n = adj.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut stack: Vec<usize> = Vec::new();
    let mut comps: Vec<Vec<usize>> = Vec::new();
    let mut counter = 0usize;

    // explicit DFS frames: (node, next child index)
    let mut frames: Vec<(usize, usize)> = Vec::new();
    for start in 0..n {
        if index[start] != usize::MAX {
            continue;
        }
        frames.push((start, 0));
        index[start] = counter;
        low[start] = counter;
        counter += 1;
        stack.push(start);
        on_stack[start] = true;

        while let Some(&mut (v, ref mut child)) = frames.last_mut() {
            if *child < adj[v].len() {
                let w = adj[v][*child];
                *child += 1;
                if index[w] == usize::MAX {
                    index[w] = counter;
                    low[w] = counter;
                    counter += 1;
                    stack.push(w);
                    on_stack[w] = true;
                    frames.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
            } else {
                frames.pop();
                if let Some(&mut (parent, _)) = frames.last_mut() {
                    low[parent] = low[parent].min(low[v]);
                }
                if low[v] == index[v] {
                    let mut comp = Vec::new();
                    loop {
                        let w = stack.pop().expect("scc stack underflow");
                        on_stack[w] = false;
                        comp.push(w);
                        if w == v {
                            break;
                        }
                    }
                    comp.sort_unstable();
                    comps.push(comp);
                }
            }
        }
    }
    comps
}

/// Components that actually contain a cycle: size at least two, or a single
/// node with a self-loop.
pub fn cyclic_sccs(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    tarjan_scc(adj)
        .into_iter()
        .filter(|comp| comp.len() > 1 || adj[comp[0]].contains(&comp[0]))
        .collect()
}

/// All components in topological order of the condensation, ties broken by
/// the smallest member index. Deterministic for fixed input.
pub fn condensation_topo_order(adj: &[Vec<usize>]) -> Vec<Vec<usize>> {
    let comps = tarjan_scc(adj);
    let mut comp_of = vec![0usize; adj.len()];
    for (ci, comp) in comps.iter().enumerate() {
        for &v in comp {
            comp_of[v] = ci;
        }
    }
    let m = comps.len();
    let mut succs: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut indeg = vec![0usize; m];
    for v in 0..adj.len() {
        for &w in &adj[v] {
            let (a, b) = (comp_of[v], comp_of[w]);
            if a != b && !succs[a].contains(&b) {
                succs[a].push(b);
                indeg[b] += 1;
            }
        }
    }
    let mut ready: Vec<usize> = (0..m).filter(|&c| indeg[c] == 0).collect();
    ready.sort_by_key(|&c| comps[c][0]);
    let mut order = Vec::new();
    while let Some(c) = ready.first().copied() {
        ready.remove(0);
        order.push(c);
        for &d in &succs[c] {
            indeg[d] -= 1;
            if indeg[d] == 0 {
                ready.push(d);
            }
        }
        ready.sort_by_key(|&c| comps[c][0]);
    }
    order.into_iter().map(|c| comps[c].clone()).collect()
}

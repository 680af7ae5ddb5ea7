use super::TaskGraph;
use std::fmt::Write as _;

/// Stage-ordered plain-text rendering injected into refinement prompts.
/// Equal graphs render to identical bytes.
pub fn render_prompt_block(g: &TaskGraph) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "Task graph: {} ({} stages, stage {} is the goal)", g.task(), g.n_stages(), g.goal_stage());
    for stage in 0..g.n_stages() {
        let _ = writeln!(out, "Stage S{stage}:");
        for n in g.nodes_at(stage) {
            let _ = writeln!(out, "  [{}]", n.id);
            let _ = writeln!(out, "    robot: {}", n.status.robot);
            let _ = writeln!(out, "    objects: {}", n.status.object);
            let _ = writeln!(out, "    environment: {}", n.status.environment);
            let mut outgoing: Vec<_> = g.outgoing(&n.id).collect();
            outgoing.sort_by(|a, b| (&a.dst, &a.id).cmp(&(&b.dst, &b.id)));
            for e in outgoing {
                let _ = writeln!(out, "    -> [{}] via {}: {}", e.dst, e.id, e.behavior);
            }
        }
    }
    out
}

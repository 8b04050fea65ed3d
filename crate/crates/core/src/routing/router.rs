//! Two-layer maze router on a fixed lattice.

use std::cmp::Reverse;
use std::collections::{BTreeSet, BinaryHeap};

use super::rear::RearLayout;
use super::{
    bus_net_id, capacitive_net_id, return_net_id, ContactPad, Layer, LayerStack, NetClass, Netlist, PadShape,
    RoutePlan, RoutingError, RoutingRules, TerminalOwner, TraceSegment, Via,
};
use crate::geom::{circle, point_in_polygon, polygon_distance, segment_rect, Rect, Vec2};
use crate::parts::{KeyBlueprint, NetRole, Solid};
use crate::placement::{Placement, ShellOutline, SHELL_MARGIN_MM};
use crate::spec::ShellPolicy;

const FREE: u32 = u32::MAX;
const MAX_RETRIES: usize = 16;
const STUB_SEARCH_PITCHES: i64 = 4;
const COST_FLOOR: u32 = 10;
const COST_RIDGE: u32 = 13;
const COST_VIA: u32 = 40;
const EPS: f64 = 1e-7;

struct Obstacle {
    layers: [bool; 2],
    shape: Vec<Vec2>,
    bbox: Rect,
    exempt: Vec<u32>,
}

impl Obstacle {
    fn new(layers: [bool; 2], shape: Vec<Vec2>, exempt: Vec<u32>) -> Self {
        let bbox = Rect::from_points(&shape).unwrap_or_default();
        Self { layers, shape, bbox, exempt }
    }
}

fn li(l: Layer) -> usize {
    match l {
        Layer::Floor => 0,
        Layer::Ridge => 1,
    }
}

fn layer_of(i: usize) -> Layer {
    if i == 0 {
        Layer::Floor
    } else {
        Layer::Ridge
    }
}

fn square(c: Vec2, half: f64) -> Vec<Vec2> {
    Rect::centered(c, 2.0 * half, 2.0 * half).corners()
}

fn bar(a: Vec2, b: Vec2, half: f64) -> Vec<Vec2> {
    segment_rect(a, b, half).corners()
}

struct Grid {
    i0: i64,
    j0: i64,
    nx: usize,
    ny: usize,
    pitch: f64,
    valid: Vec<bool>,
}

impl Grid {
    fn cells(&self) -> usize {
        self.nx * self.ny
    }

    fn center(&self, c: usize) -> Vec2 {
        let i = (c % self.nx) as i64 + self.i0;
        let j = (c / self.nx) as i64 + self.j0;
        Vec2::new(i as f64 * self.pitch, j as f64 * self.pitch)
    }

    fn index(&self, i: i64, j: i64) -> Option<usize> {
        let (a, b) = (i - self.i0, j - self.j0);
        if a < 0 || b < 0 || a as usize >= self.nx || b as usize >= self.ny {
            None
        } else {
            Some(b as usize * self.nx + a as usize)
        }
    }

    fn neighbors(&self, c: usize) -> impl Iterator<Item = (usize, usize)> + '_ {
        // (neighbor, edge id); horizontal edges first, then vertical
        let (x, y) = (c % self.nx, c / self.nx);
        let h = self.nx * self.ny;
        let mut out = Vec::with_capacity(4);
        if x + 1 < self.nx {
            out.push((c + 1, c));
        }
        if x > 0 {
            out.push((c - 1, c - 1));
        }
        if y + 1 < self.ny {
            out.push((c + self.nx, h + c));
        }
        if y > 0 {
            out.push((c - self.nx, h + c - self.nx));
        }
        out.into_iter()
    }

    fn edge_cells(&self, e: usize) -> (usize, usize) {
        let h = self.nx * self.ny;
        if e < h {
            (e, e + 1)
        } else {
            (e - h, e - h + self.nx)
        }
    }
}

struct Router<'a> {
    rules: &'a RoutingRules,
    grid: Grid,
    obstacles: Vec<Obstacle>,
    names: Vec<String>,
    /// Per layer, obstacle ids near each cell and each edge.
    cell_obs: [Vec<Vec<u32>>; 2],
    edge_obs: [Vec<Vec<u32>>; 2],
}

impl Router<'_> {
    fn net_index(&self, id: &str) -> u32 {
        self.names.iter().position(|n| n == id).expect("known net") as u32
    }

    fn clearance_ok(&self, shape: &[Vec2], layer: usize, net: u32) -> bool {
        let bb = Rect::from_points(shape).unwrap_or_default().expand(self.rules.clearance_mm);
        self.obstacles.iter().all(|o| {
            !o.layers[layer]
                || o.exempt.contains(&net)
                || !o.bbox.overlaps(&bb)
                || polygon_distance(shape, &o.shape) >= self.rules.clearance_mm - EPS
        })
    }

    fn build_tables(&mut self) {
        let half = self.rules.trace_width() / 2.0;
        let n = self.grid.cells();
        let reach = self.rules.clearance_mm + half + self.grid.pitch;
        for layer in 0..2 {
            let mut cells = vec![Vec::new(); n];
            let mut edges = vec![Vec::new(); 2 * n];
            for (oi, o) in self.obstacles.iter().enumerate() {
                if !o.layers[layer] {
                    continue;
                }
                let bb = o.bbox.expand(reach);
                let p = self.grid.pitch;
                let (ia, ib) = ((bb.min.x / p).floor() as i64, (bb.max.x / p).ceil() as i64);
                let (ja, jb) = ((bb.min.y / p).floor() as i64, (bb.max.y / p).ceil() as i64);
                for j in ja..=jb {
                    for i in ia..=ib {
                        let Some(c) = self.grid.index(i, j) else { continue };
                        let cc = self.grid.center(c);
                        if polygon_distance(&square(cc, half), &o.shape) < self.rules.clearance_mm - EPS {
                            cells[c].push(oi as u32);
                        }
                        for (nb, e) in self.grid.neighbors(c) {
                            if nb < c {
                                continue;
                            }
                            if polygon_distance(&bar(cc, self.grid.center(nb), half), &o.shape)
                                < self.rules.clearance_mm - EPS
                            {
                                edges[e].push(oi as u32);
                            }
                        }
                    }
                }
            }
            self.cell_obs[layer] = cells;
            self.edge_obs[layer] = edges;
        }
    }

    fn blocked(&self, list: &[u32], net: u32) -> bool {
        list.iter().any(|&o| !self.obstacles[o as usize].exempt.contains(&net))
    }
}

/// Finds a grid cell for an off-grid terminal and an L-shaped stub to it.
fn escape(
    r: &Router,
    owner: &[Vec<u32>; 2],
    at: Vec2,
    layer: usize,
    net: u32,
) -> Option<(usize, Vec<Vec2>)> {
    let g = &r.grid;
    let p = g.pitch;
    let half = r.rules.trace_width() / 2.0;
    let (ci, cj) = ((at.x / p).round() as i64, (at.y / p).round() as i64);
    let mut cands = Vec::new();
    for dj in -STUB_SEARCH_PITCHES..=STUB_SEARCH_PITCHES {
        for di in -STUB_SEARCH_PITCHES..=STUB_SEARCH_PITCHES {
            if let Some(c) = g.index(ci + di, cj + dj) {
                let cc = g.center(c);
                let d = (cc.x - at.x).abs() + (cc.y - at.y).abs();
                cands.push((d, c));
            }
        }
    }
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    for (_, c) in cands {
        if !g.valid[c] || (owner[layer][c] != FREE && owner[layer][c] != net) {
            continue;
        }
        let cc = g.center(c);
        if !r.clearance_ok(&square(cc, half), layer, net) {
            continue;
        }
        if at.dist(cc) < 1e-9 {
            return Some((c, vec![cc]));
        }
        for corner in [Vec2::new(cc.x, at.y), Vec2::new(at.x, cc.y)] {
            let path: Vec<Vec2> = dedup_points(vec![at, corner, cc]);
            if path.windows(2).all(|w| r.clearance_ok(&bar(w[0], w[1], half), layer, net)) {
                return Some((c, path));
            }
        }
    }
    None
}

fn dedup_points(pts: Vec<Vec2>) -> Vec<Vec2> {
    let mut out: Vec<Vec2> = Vec::with_capacity(pts.len());
    for p in pts {
        if out.last().is_none_or(|q: &Vec2| q.dist(p) > 1e-9) {
            out.push(p);
        }
    }
    out
}

/// Drops interior points of straight runs.
fn simplify(pts: Vec<Vec2>) -> Vec<Vec2> {
    let pts = dedup_points(pts);
    if pts.len() < 3 {
        return pts;
    }
    let mut out = vec![pts[0]];
    for w in pts.windows(3) {
        if (w[1] - w[0]).cross(w[2] - w[1]).abs() > 1e-9 {
            out.push(w[1]);
        }
    }
    out.push(*pts.last().unwrap());
    out
}

fn region_rect(placement: &Placement) -> Rect {
    placement.full_bounds().expand(SHELL_MARGIN_MM)
}

fn contact_polygons(placement: &Placement, blueprints: &[KeyBlueprint]) -> Vec<ContactPad> {
    let mut out = Vec::new();
    for (pk, bp) in placement.placed.iter().zip(blueprints) {
        for b in bp.conductive_bodies() {
            if b.solid.aabb().min[2] > 1e-6 {
                continue;
            }
            let local: Vec<Vec2> = match &b.solid {
                Solid::Block { min, max } => Rect::new(min[0], min[1], max[0], max[1]).corners(),
                Solid::Prism { profile, .. } => profile.outer.clone(),
                _ => continue,
            };
            let net = match b.net_role {
                Some(NetRole::Signal) => bus_net_id().to_string(),
                Some(NetRole::Return) => return_net_id(&pk.id),
                Some(NetRole::Capacitive) => capacitive_net_id(&pk.id),
                None => continue,
            };
            out.push(ContactPad {
                net,
                key: pk.id.clone(),
                polygon: local.into_iter().map(|v| pk.to_world(v)).collect(),
            });
        }
    }
    out
}

/// Routes every net of `netlist` on the floor and ridge bands.
#[allow(clippy::too_many_arguments)]
pub fn route_nets(
    netlist: &Netlist,
    placement: &Placement,
    shell: &ShellOutline,
    blueprints: &[KeyBlueprint],
    rear: &RearLayout,
    rules: &RoutingRules,
    exposed: bool,
) -> Result<RoutePlan, RoutingError> {
    let stack = LayerStack::new(placement.base_height_mm, rules.trace_cross_section_mm.1, exposed);
    let half = rules.trace_width() / 2.0;
    let p = rules.grid_pitch_mm;

    let mut names: Vec<String> = netlist.nets.iter().map(|n| n.id.clone()).collect();
    let socket_pads = rear.socket.iter().flat_map(|s| s.electrodes.iter());
    for pad in rear.pads.iter().chain(socket_pads.clone()) {
        if pad.net.is_none() {
            names.push(format!("nc:{}", pad.pin));
        }
    }

    let region = region_rect(placement);
    let (i0, i1) = ((region.min.x / p).ceil() as i64, (region.max.x / p).floor() as i64);
    let (j0, j1) = ((region.min.y / p).ceil() as i64, (region.max.y / p).floor() as i64);
    let nx = (i1 - i0 + 1).max(1) as usize;
    let ny = (j1 - j0 + 1).max(1) as usize;
    let mut grid = Grid { i0, j0, nx, ny, pitch: p, valid: vec![false; nx * ny] };
    let reach = half + rules.wall_mm;
    for c in 0..grid.cells() {
        let sq = square(grid.center(c), reach);
        grid.valid[c] = match shell.policy {
            ShellPolicy::None => sq.iter().all(|&v| region.contains_point(v)),
            _ => shell.polygons.iter().any(|poly| sq.iter().all(|&v| point_in_polygon(v, poly))),
        };
    }

    let mut router = Router {
        rules,
        grid,
        obstacles: Vec::new(),
        names,
        cell_obs: [Vec::new(), Vec::new()],
        edge_obs: [Vec::new(), Vec::new()],
    };

    let contacts = contact_polygons(placement, blueprints);
    for c in &contacts {
        let n = router.net_index(&c.net);
        router.obstacles.push(Obstacle::new([false, true], c.polygon.clone(), vec![n]));
    }
    let mut anchor_vias = Vec::new();
    for net in &netlist.nets {
        for t in &net.terminals {
            if let TerminalOwner::Key { anchored: true, .. } = t.owner {
                let n = router.net_index(&net.id);
                router.obstacles.push(Obstacle::new([true, true], square(t.position, half), vec![n]));
                anchor_vias.push(Via {
                    net: net.id.clone(),
                    at: t.position,
                    size_mm: rules.trace_width(),
                    z0: stack.floor.0,
                    z1: stack.base_height_mm,
                });
            }
        }
    }
    for pad in rear.pads.iter().chain(socket_pads) {
        let id = pad.net.clone().unwrap_or_else(|| format!("nc:{}", pad.pin));
        let n = router.net_index(&id);
        let shape = match pad.shape {
            PadShape::Square { size, .. } => square(pad.center, size / 2.0),
            PadShape::Cone { base_radius, .. } => circle(pad.center, base_radius, 24),
        };
        router.obstacles.push(Obstacle::new([false, true], shape, vec![n]));
    }
    for m in &rear.meanders {
        let res = router.net_index(&m.id);
        let a = router.net_index(&m.net_a);
        let b = router.net_index(&m.net_b);
        for w in m.polyline.windows(2) {
            router.obstacles.push(Obstacle::new([true, false], bar(w[0], w[1], half), vec![res, a, b]));
        }
        for w in m.core.windows(2) {
            router.obstacles.push(Obstacle::new([true, false], bar(w[0], w[1], half), vec![res]));
        }
    }

    // terminal cells and stubs
    let mut owner: [Vec<u32>; 2] = [vec![FREE; router.grid.cells()], vec![FREE; router.grid.cells()]];
    for m in &rear.meanders {
        let res = router.net_index(&m.id);
        for w in m.polyline.windows(2) {
            let steps = (w[0].dist(w[1]) / p).floor() as usize;
            for s in 0..=steps {
                let q = w[0] + (w[1] - w[0]) * (s as f64 * p / w[0].dist(w[1]).max(1e-12));
                if let Some(c) = router.grid.index((q.x / p).round() as i64, (q.y / p).round() as i64) {
                    if router.grid.center(c).dist(q) < 1e-6 && owner[0][c] == FREE {
                        owner[0][c] = res;
                    }
                }
            }
        }
    }
    let mut stubs: Vec<TraceSegment> = Vec::new();
    let mut terminal_states: Vec<Vec<(usize, usize)>> = vec![Vec::new(); netlist.nets.len()];
    for (ni, net) in netlist.nets.iter().enumerate() {
        if !net.is_routed() {
            continue;
        }
        let n = ni as u32;
        for t in &net.terminals {
            let layer = li(t.layer);
            if let TerminalOwner::Resistor { .. } = t.owner {
                // resistor ends sit on lattice points owned by the meander
                let c = router
                    .grid
                    .index((t.position.x / p).round() as i64, (t.position.y / p).round() as i64)
                    .ok_or_else(|| RoutingError::NoEscape { net: net.id.clone(), at: t.position })?;
                owner[layer][c] = n;
                router.obstacles.push(Obstacle::new([layer == 0, layer == 1], square(t.position, half), vec![n]));
                terminal_states[ni].push((layer, c));
                continue;
            }
            let (c, path) = escape(&router, &owner, t.position, layer, n)
                .ok_or_else(|| RoutingError::NoEscape { net: net.id.clone(), at: t.position })?;
            owner[layer][c] = n;
            let cc = router.grid.center(c);
            router.obstacles.push(Obstacle::new([layer == 0, layer == 1], square(cc, half), vec![n]));
            for w in path.windows(2) {
                router.obstacles.push(Obstacle::new([layer == 0, layer == 1], bar(w[0], w[1], half), vec![n]));
            }
            if path.len() > 1 {
                stubs.push(TraceSegment { net: net.id.clone(), layer: t.layer, points: path, width_mm: rules.trace_width() });
            }
            terminal_states[ni].push((layer, c));
        }
        terminal_states[ni].sort_unstable();
        terminal_states[ni].dedup();
    }
    router.build_tables();

    let base_owner = owner;
    let mut order: Vec<usize> = (0..netlist.nets.len()).filter(|&i| netlist.nets[i].is_routed()).collect();
    let mut attempt = 0;
    let (paths, vias) = loop {
        let mut owner = base_owner.clone();
        let mut paths: Vec<(usize, Vec<(usize, usize)>)> = Vec::new();
        let mut failure = None;
        for &ni in &order {
            let bus = netlist.nets[ni].class == NetClass::SignalBus;
            match grow_tree(&router, &mut owner, ni as u32, &terminal_states[ni], bus) {
                Ok(ps) => paths.extend(ps.into_iter().map(|p| (ni, p))),
                Err((term, region)) => {
                    failure = Some((ni, term, region));
                    break;
                }
            }
        }
        match failure {
            None => {
                let vias = collect_vias(&router.grid, &paths, netlist, &stack, rules);
                break (paths, vias);
            }
            Some((ni, term, region)) => {
                if attempt >= MAX_RETRIES {
                    return Err(RoutingError::Unroutable {
                        net: netlist.nets[ni].id.clone(),
                        terminal: router.grid.center(term),
                        region,
                    });
                }
                attempt += 1;
                order.retain(|&x| x != ni);
                order.insert(0, ni);
            }
        }
    };

    let mut traces = stubs;
    for (ni, states) in terminal_states.iter().enumerate() {
        for &(l, c) in states {
            traces.push(TraceSegment {
                net: netlist.nets[ni].id.clone(),
                layer: layer_of(l),
                points: vec![router.grid.center(c)],
                width_mm: rules.trace_width(),
            });
        }
    }
    for (ni, path) in &paths {
        let mut run: Vec<Vec2> = Vec::new();
        let mut run_layer = path[0].0;
        for &(l, c) in path {
            if l != run_layer {
                traces.push(TraceSegment {
                    net: netlist.nets[*ni].id.clone(),
                    layer: layer_of(run_layer),
                    points: simplify(std::mem::take(&mut run)),
                    width_mm: rules.trace_width(),
                });
                run_layer = l;
            }
            run.push(router.grid.center(c));
        }
        traces.push(TraceSegment {
            net: netlist.nets[*ni].id.clone(),
            layer: layer_of(run_layer),
            points: simplify(run),
            width_mm: rules.trace_width(),
        });
    }
    let mut all_vias = anchor_vias;
    all_vias.extend(vias);

    Ok(RoutePlan {
        rules: *rules,
        stack,
        traces,
        vias: all_vias,
        resistors: rear.meanders.clone(),
        pads: rear.pads.clone(),
        socket: rear.socket.clone(),
        contacts,
        inter_row_connectors: netlist.inter_row_connectors,
    })
}

fn collect_vias(
    grid: &Grid,
    paths: &[(usize, Vec<(usize, usize)>)],
    netlist: &Netlist,
    stack: &LayerStack,
    rules: &RoutingRules,
) -> Vec<Via> {
    let mut seen = BTreeSet::new();
    let mut out = Vec::new();
    for (ni, path) in paths {
        for w in path.windows(2) {
            if w[0].0 != w[1].0 && seen.insert(w[0].1) {
                out.push(Via {
                    net: netlist.nets[*ni].id.clone(),
                    at: grid.center(w[0].1),
                    size_mm: rules.trace_width(),
                    z0: stack.floor.0,
                    z1: stack.base_height_mm,
                });
            }
        }
    }
    out
}

type Failure = (usize, Rect);

/// Connects all terminal states of one net, nearest terminal first.
fn grow_tree(
    r: &Router,
    owner: &mut [Vec<u32>; 2],
    net: u32,
    terminals: &[(usize, usize)],
    bus: bool,
) -> Result<Vec<Vec<(usize, usize)>>, Failure> {
    let g = &r.grid;
    let n = g.cells();
    if terminals.len() <= 1 {
        return Ok(Vec::new());
    }
    let allowed = |owner: &[Vec<u32>; 2], l: usize, c: usize| -> bool {
        g.valid[c]
            && !(bus && l == 0)
            && (owner[l][c] == FREE || owner[l][c] == net)
            && !r.blocked(&r.cell_obs[l][c], net)
    };
    let mut tree: Vec<usize> = vec![terminals[0].0 * n + terminals[0].1];
    let mut remaining: BTreeSet<usize> = terminals[1..].iter().map(|&(l, c)| l * n + c).collect();
    remaining.remove(&tree[0]);
    let mut paths = Vec::new();
    let mut dist = vec![u32::MAX; 2 * n];
    let mut prev = vec![u32::MAX; 2 * n];
    while !remaining.is_empty() {
        dist.iter_mut().for_each(|d| *d = u32::MAX);
        prev.iter_mut().for_each(|d| *d = u32::MAX);
        let mut heap = BinaryHeap::new();
        for &s in &tree {
            dist[s] = 0;
            heap.push(Reverse((0u32, s)));
        }
        let mut hit = None;
        let mut seen_box: Option<Rect> = None;
        while let Some(Reverse((d, s))) = heap.pop() {
            if d > dist[s] {
                continue;
            }
            let (l, c) = (s / n, s % n);
            let cc = g.center(c);
            let pt = Rect::new(cc.x, cc.y, cc.x, cc.y);
            seen_box = Some(seen_box.map_or(pt, |b| b.union(&pt)));
            if remaining.contains(&s) {
                hit = Some(s);
                break;
            }
            let step = if l == 0 || bus { COST_FLOOR } else { COST_RIDGE };
            for (nb, e) in g.neighbors(c) {
                if !allowed(owner, l, nb) || r.blocked(&r.edge_obs[l][e], net) {
                    continue;
                }
                debug_assert!({
                    let (a, b) = g.edge_cells(e);
                    (a == c && b == nb) || (a == nb && b == c)
                });
                let t = l * n + nb;
                let nd = d + step;
                if nd < dist[t] {
                    dist[t] = nd;
                    prev[t] = s as u32;
                    heap.push(Reverse((nd, t)));
                }
            }
            let o = 1 - l;
            if allowed(owner, o, c) && allowed(owner, l, c) {
                let t = o * n + c;
                let nd = d + COST_VIA;
                if nd < dist[t] {
                    dist[t] = nd;
                    prev[t] = s as u32;
                    heap.push(Reverse((nd, t)));
                }
            }
        }
        let Some(end) = hit else {
            let target = *remaining.iter().next().unwrap();
            return Err((target % n, seen_box.unwrap_or_default()));
        };
        let mut path = vec![end];
        let mut cur = end;
        while dist[cur] != 0 {
            cur = prev[cur] as usize;
            path.push(cur);
        }
        path.reverse();
        for &s in &path {
            owner[s / n][s % n] = net;
            tree.push(s);
        }
        remaining.remove(&end);
        paths.push(path.into_iter().map(|s| (s / n, s % n)).collect());
    }
    Ok(paths)
}

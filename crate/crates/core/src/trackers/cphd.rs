//! Cardinalized PHD tracking with explicit measurement association.
//!
//! The scene is held as independent clusters of labeled Gaussian
//! components, each cluster carrying its own cardinality distribution over
//! `0..=n_max`. Every frame the clusters are re-formed from the connected
//! components of the measurement gating graph, so objects that share
//! measurements are updated jointly and separated objects stay cheap.
//!
//! Within a cluster, measurements are hard-assigned to components by a
//! minimum-cost assignment over negative log association scores (each
//! component may also miss), while the cluster cardinality is updated with
//! the full cardinality recursion. The cardinality mode caps how many
//! components a cluster may report, which suppresses duplicate tracks.

use crate::assignment::{solve_assignment, CostMatrix};
use crate::detection::{body_to_head, rect_to_point, PointMeasurement, Rect, Sensor, SensorModel};
use crate::trackers::{
    innovation, innovation_density, joseph_update, mahalanobis2, GaussianState, MotionModel, Report,
};

/// Tuning knobs of the association CPHD recursion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CphdConfig {
    /// Per-frame survival probability of an existing object.
    pub survival_prob: f64,
    /// Weight and existence belief given to a newborn component.
    pub birth_weight: f64,
    /// Components below this weight are dropped.
    pub prune_weight: f64,
    /// Components above this weight may be reported as tracks.
    pub report_weight: f64,
    /// Weights are capped here so misses can always lower them.
    pub max_weight: f64,
    /// Squared-Mahalanobis gate tying measurements to components.
    pub gate_chi2: f64,
    /// Largest cardinality a cluster distribution covers.
    pub n_max: usize,
    /// Components of one cluster closer than this merge, px.
    pub merge_distance: f64,
    /// Birth candidates closer than this merge into one birth, px.
    pub birth_merge_radius: f64,
    /// No birth is spawned within this distance of a strong component.
    pub birth_suppression_radius: f64,
    /// Standard deviation of newborn velocity, px/s.
    pub birth_velocity_std: f64,
    /// Lower bound on clutter intensity used in updates.
    pub clutter_floor: f64,
    /// Hard cap on components per cluster.
    pub max_components: usize,
    /// Hard cap on simultaneous clusters.
    pub max_clusters: usize,
}

impl Default for CphdConfig {
    fn default() -> Self {
        Self {
            survival_prob: 0.99,
            birth_weight: 0.35,
            prune_weight: 0.01,
            report_weight: 0.5,
            max_weight: 0.999,
            gate_chi2: 13.8,
            n_max: 20,
            merge_distance: 6.0,
            birth_merge_radius: 25.0,
            birth_suppression_radius: 15.0,
            birth_velocity_std: 30.0,
            clutter_floor: 1e-9,
            max_components: 30,
            max_clusters: 40,
        }
    }
}

/// One labeled Gaussian component of a cluster's intensity.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledComponent {
    pub label: u32,
    pub weight: f64,
    pub state: GaussianState,
}

/// A group of components updated jointly, with its own cardinality
/// distribution over `0..=n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct CphdCluster {
    pub components: Vec<LabeledComponent>,
    pub cardinality: Vec<f64>,
}

impl CphdCluster {
    pub fn total_weight(&self) -> f64 {
        self.components.iter().map(|c| c.weight).sum()
    }

    /// Most probable cardinality; ties resolve to the smaller count.
    pub fn map_cardinality(&self) -> usize {
        let mut best = 0;
        for (n, &p) in self.cardinality.iter().enumerate() {
            if p > self.cardinality[best] {
                best = n;
            }
        }
        best
    }
}

/// Binomial thinning of a cardinality distribution: every object
/// independently survives with probability `keep_prob`.
pub fn thin_cardinality(p: &[f64], keep_prob: f64) -> Vec<f64> {
    let q = keep_prob.clamp(0.0, 1.0);
    let mut out = vec![0.0; p.len()];
    for (n, &pn) in p.iter().enumerate() {
        if pn == 0.0 {
            continue;
        }
        let mut binom = 1.0f64;
        for (k, slot) in out.iter_mut().enumerate().take(n + 1) {
            // binom holds C(n, k) incrementally.
            *slot += pn * binom * q.powi(k as i32) * (1.0 - q).powi((n - k) as i32);
            binom = binom * (n - k) as f64 / (k + 1) as f64;
        }
    }
    out
}

/// Distribution of the sum of two independent cardinalities, truncated to
/// the shorter input's support and renormalized.
pub fn convolve_cardinality(a: &[f64], b: &[f64]) -> Vec<f64> {
    let len = a.len().min(b.len());
    let mut out = vec![0.0; len];
    for (i, &ai) in a.iter().enumerate() {
        if ai == 0.0 {
            continue;
        }
        for (j, &bj) in b.iter().enumerate() {
            if i + j < len {
                out[i + j] += ai * bj;
            }
        }
    }
    let total: f64 = out.iter().sum();
    if total > 0.0 {
        for v in &mut out {
            *v /= total;
        }
    }
    out
}

/// Cardinality posterior of one cluster after observing `xi.len()`
/// measurements.
///
/// `prior` is the predicted cardinality distribution, `total_weight` the
/// summed component weights of the predicted intensity, and
/// `xi[j] = (clutter_mean / kappa(z_j)) * pd * sum_i w_i q_i(z_j)` the
/// detection evidence of measurement `j` against that intensity. Clutter
/// count is Poisson with mean `clutter_mean`.
pub fn cardinality_update(
    prior: &[f64],
    total_weight: f64,
    pd: f64,
    xi: &[f64],
    clutter_mean: f64,
) -> Vec<f64> {
    let m = xi.len();
    // Elementary symmetric functions e_0..e_m of the xi values.
    let mut esf = vec![0.0f64; m + 1];
    esf[0] = 1.0;
    for &x in xi {
        for j in (1..=m).rev() {
            esf[j] += x * esf[j - 1];
        }
    }
    let lambda = clutter_mean.max(1e-12);
    let w = total_weight.max(1e-12);
    let mut post = vec![0.0f64; prior.len()];
    for (n, &prior_n) in prior.iter().enumerate() {
        if prior_n == 0.0 {
            continue;
        }
        let mut upsilon = 0.0;
        for (j, &e) in esf.iter().enumerate().take(m.min(n) + 1) {
            // The factorial times the Poisson clutter pmf reduces to
            // lambda^(m-j); the common e^(-lambda) cancels on
            // normalization.
            let mut term = lambda.powi((m - j) as i32);
            for k in 0..j {
                term *= (n - k) as f64;
            }
            term *= (1.0 - pd).powi((n - j) as i32);
            term /= w.powi(j as i32);
            term *= e;
            upsilon += term;
        }
        post[n] = prior_n * upsilon;
    }
    let total: f64 = post.iter().sum();
    if total > 0.0 {
        for v in &mut post {
            *v /= total;
        }
        post
    } else {
        prior.to_vec()
    }
}

fn newborn_cardinality(birth_weight: f64, n_max: usize) -> Vec<f64> {
    let mut card = vec![0.0; n_max + 1];
    card[0] = 1.0 - birth_weight;
    card[1] = birth_weight;
    card
}

struct Measurement {
    point: PointMeasurement,
    sensor: Sensor,
}

/// Union-find over component and measurement nodes.
struct DisjointSets {
    parent: Vec<usize>,
}

impl DisjointSets {
    fn new(len: usize) -> Self {
        Self {
            parent: (0..len).collect(),
        }
    }

    fn find(&mut self, i: usize) -> usize {
        if self.parent[i] != i {
            let root = self.find(self.parent[i]);
            self.parent[i] = root;
        }
        self.parent[i]
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.parent[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Gaussian-mixture CPHD tracker with per-cluster association.
#[derive(Debug, Clone)]
pub struct CphdTracker {
    config: CphdConfig,
    motion: MotionModel,
    head_model: SensorModel,
    body_model: SensorModel,
    clusters: Vec<CphdCluster>,
    next_label: u32,
    frame: u32,
    reports: Vec<Report>,
}

impl CphdTracker {
    pub fn new(
        config: CphdConfig,
        motion: MotionModel,
        head_model: SensorModel,
        body_model: SensorModel,
    ) -> Self {
        Self {
            config,
            motion,
            head_model,
            body_model,
            clusters: Vec::new(),
            next_label: 1,
            frame: 0,
            reports: Vec::new(),
        }
    }

    pub fn frame(&self) -> u32 {
        self.frame
    }

    pub fn clusters(&self) -> &[CphdCluster] {
        &self.clusters
    }

    /// All reports emitted so far.
    pub fn reports(&self) -> &[Report] {
        &self.reports
    }

    /// Cardinality distribution of the whole scene: the sum of the
    /// independent cluster cardinalities.
    pub fn scene_cardinality(&self) -> Vec<f64> {
        let mut card = vec![0.0; self.config.n_max + 1];
        card[0] = 1.0;
        for cluster in &self.clusters {
            card = convolve_cardinality(&card, &cluster.cardinality);
        }
        card
    }

    /// Advances one frame. `None` means the sensor was not scheduled;
    /// `Some` of an empty list means it ran and reported nothing. Body
    /// rectangles are taken raw and converted to head regions internally.
    pub fn step(&mut self, head: Option<&[Rect]>, body: Option<&[Rect]>) {
        self.frame += 1;
        self.predict();
        if head.is_some() || body.is_some() {
            let mut meas = Vec::new();
            if let Some(rects) = head {
                meas.extend(rects.iter().map(|r| Measurement {
                    point: rect_to_point(r),
                    sensor: Sensor::Head,
                }));
            }
            if let Some(rects) = body {
                meas.extend(rects.iter().map(|r| Measurement {
                    point: rect_to_point(&body_to_head(r)),
                    sensor: Sensor::Body,
                }));
            }
            let gates = self.gate_matrix(&meas);
            let gates = self.recluster(&meas, &gates);
            let sensors: Vec<Sensor> = [head.map(|_| Sensor::Head), body.map(|_| Sensor::Body)]
                .into_iter()
                .flatten()
                .collect();
            for sensor in sensors {
                self.sensor_update(&meas, &gates, sensor);
            }
            self.spawn_births(&meas, &gates);
            self.cleanup();
        }
        self.report();
    }

    fn predict(&mut self) {
        let f = self.motion.transition_matrix();
        let q = self.motion.process_noise();
        let ps = self.config.survival_prob;
        for cluster in &mut self.clusters {
            for comp in &mut cluster.components {
                comp.weight *= ps;
                comp.state.mean = f * comp.state.mean;
                comp.state.cov = f * comp.state.cov * f.transpose() + q;
            }
            cluster.cardinality = thin_cardinality(&cluster.cardinality, ps);
        }
    }

    /// Flattened component list as (cluster index, component index).
    fn component_index(&self) -> Vec<(usize, usize)> {
        let mut index = Vec::new();
        for (ci, cluster) in self.clusters.iter().enumerate() {
            for ki in 0..cluster.components.len() {
                index.push((ci, ki));
            }
        }
        index
    }

    /// `gates[c][j]` is true when measurement `j` falls inside component
    /// `c`'s gate, with `c` running over the flattened component index.
    fn gate_matrix(&self, meas: &[Measurement]) -> Vec<Vec<bool>> {
        self.component_index()
            .iter()
            .map(|&(ci, ki)| {
                let comp = &self.clusters[ci].components[ki];
                meas.iter()
                    .map(|m| {
                        let inn = innovation(&comp.state, m.point.z, m.point.var);
                        mahalanobis2(&inn) <= self.config.gate_chi2
                    })
                    .collect()
            })
            .collect()
    }

    /// Re-forms clusters as connected components of the gating graph and
    /// returns the gate matrix remapped onto the new component order.
    /// Components of one old cluster that gate no measurement stay with
    /// their gated siblings when any exist, else form one residual
    /// cluster, so clusters split only along measurement evidence.
    fn recluster(&mut self, meas: &[Measurement], gates: &[Vec<bool>]) -> Vec<Vec<bool>> {
        let index = self.component_index();
        let comp_count = index.len();
        let mut sets = DisjointSets::new(comp_count + meas.len());
        for (c, gate_row) in gates.iter().enumerate() {
            for (j, &gated) in gate_row.iter().enumerate() {
                if gated {
                    sets.union(c, comp_count + j);
                }
            }
        }
        let attached: Vec<bool> = gates.iter().map(|row| row.iter().any(|&g| g)).collect();

        // Group attached components by their connected-component root.
        let mut group_of_root: std::collections::BTreeMap<usize, usize> =
            std::collections::BTreeMap::new();
        let mut groups: Vec<Vec<(usize, usize)>> = Vec::new();
        let mut group_of_old: Vec<Option<usize>> = vec![None; self.clusters.len()];
        for (c, &(ci, ki)) in index.iter().enumerate() {
            if !attached[c] {
                continue;
            }
            let root = sets.find(c);
            let group = *group_of_root.entry(root).or_insert_with(|| {
                groups.push(Vec::new());
                groups.len() - 1
            });
            groups[group].push((ci, ki));
            group_of_old[ci].get_or_insert(group);
        }
        // Unattached components follow the first attached sibling of their
        // old cluster, or form a residual group of that cluster.
        for (c, &(ci, ki)) in index.iter().enumerate() {
            if attached[c] {
                continue;
            }
            let group = *group_of_old[ci].get_or_insert_with(|| {
                groups.push(Vec::new());
                groups.len() - 1
            });
            groups[group].push((ci, ki));
        }

        // Cardinality of each new cluster: thin each old cluster's
        // distribution by the weight fraction it contributes, then convolve
        // the contributions.
        let old_totals: Vec<f64> = self.clusters.iter().map(|c| c.total_weight()).collect();
        let mut next: Vec<CphdCluster> = Vec::with_capacity(groups.len());
        for members in &groups {
            let mut by_old: std::collections::BTreeMap<usize, f64> =
                std::collections::BTreeMap::new();
            for &(ci, ki) in members {
                *by_old.entry(ci).or_insert(0.0) += self.clusters[ci].components[ki].weight;
            }
            let mut cardinality = vec![0.0; self.config.n_max + 1];
            cardinality[0] = 1.0;
            for (&ci, &weight) in &by_old {
                if old_totals[ci] > 0.0 {
                    let fraction = (weight / old_totals[ci]).min(1.0);
                    let thinned = thin_cardinality(&self.clusters[ci].cardinality, fraction);
                    cardinality = convolve_cardinality(&cardinality, &thinned);
                }
            }
            let components = members
                .iter()
                .map(|&(ci, ki)| self.clusters[ci].components[ki].clone())
                .collect();
            next.push(CphdCluster {
                components,
                cardinality,
            });
        }
        // Remap the gate matrix onto the new flattened order.
        let mut old_base = vec![0usize; self.clusters.len()];
        for ci in 1..self.clusters.len() {
            old_base[ci] = old_base[ci - 1] + self.clusters[ci - 1].components.len();
        }
        let mut remapped = Vec::with_capacity(comp_count);
        for members in &groups {
            for &(ci, ki) in members {
                remapped.push(gates[old_base[ci] + ki].clone());
            }
        }
        self.clusters = next;
        debug_assert_eq!(remapped.len(), comp_count);
        remapped
    }

    fn sensor_update(&mut self, meas: &[Measurement], gates: &[Vec<bool>], sensor: Sensor) {
        let model = match sensor {
            Sensor::Head => self.head_model,
            Sensor::Body => self.body_model,
        };
        let mut flat_base = vec![0usize; self.clusters.len()];
        for ci in 1..self.clusters.len() {
            flat_base[ci] = flat_base[ci - 1] + self.clusters[ci - 1].components.len();
        }
        let clutter_floor = self.config.clutter_floor;
        let max_weight = self.config.max_weight;

        for (ci, cluster) in self.clusters.iter_mut().enumerate() {
            let comp_count = cluster.components.len();
            if comp_count == 0 {
                continue;
            }
            let base = flat_base[ci];
            // Measurements of this sensor gated to this cluster.
            let cluster_meas: Vec<usize> = (0..meas.len())
                .filter(|&j| {
                    meas[j].sensor == sensor && (0..comp_count).any(|k| gates[base + k][j])
                })
                .collect();

            let kappa_at = |j: usize| model.clutter_intensity(meas[j].point.z).max(clutter_floor);

            // Association likelihoods.
            let mut density = vec![vec![0.0f64; cluster_meas.len()]; comp_count];
            for (k, comp) in cluster.components.iter().enumerate() {
                for (mj, &j) in cluster_meas.iter().enumerate() {
                    if gates[base + k][j] {
                        let inn = innovation(&comp.state, meas[j].point.z, meas[j].point.var);
                        density[k][mj] = innovation_density(&inn);
                    }
                }
            }

            // Cardinality first, on predicted-for-this-sensor weights.
            let total_weight = cluster.total_weight();
            let xi: Vec<f64> = cluster_meas
                .iter()
                .enumerate()
                .map(|(mj, &j)| {
                    let evidence: f64 = cluster
                        .components
                        .iter()
                        .enumerate()
                        .map(|(k, comp)| comp.weight * density[k][mj])
                        .sum();
                    model.clutter_rate.max(1e-12) / kappa_at(j) * model.pd * evidence
                })
                .collect();
            cluster.cardinality = cardinality_update(
                &cluster.cardinality,
                total_weight,
                model.pd,
                &xi,
                model.clutter_rate,
            );

            // Hard association: rows are components, columns the cluster's
            // measurements plus one personal miss column per component.
            let cols = cluster_meas.len() + comp_count;
            let cost = CostMatrix::from_fn(comp_count, cols, |k, col| {
                if col < cluster_meas.len() {
                    let score = model.pd * cluster.components[k].weight * density[k][col]
                        / kappa_at(cluster_meas[col]);
                    if score > 0.0 {
                        -score.ln()
                    } else {
                        CostMatrix::FORBIDDEN
                    }
                } else if col - cluster_meas.len() == k {
                    let score = (1.0 - model.pd) * cluster.components[k].weight;
                    if score > 0.0 {
                        -score.ln()
                    } else {
                        CostMatrix::FORBIDDEN
                    }
                } else {
                    CostMatrix::FORBIDDEN
                }
            })
            .expect("association costs are finite or forbidden");
            let assignment = solve_assignment(&cost);

            let mut assigned_meas: Vec<Option<usize>> = vec![None; comp_count];
            for &(k, col) in &assignment.pairs {
                if col < cluster_meas.len() {
                    assigned_meas[k] = Some(cluster_meas[col]);
                }
            }
            for (k, comp) in cluster.components.iter_mut().enumerate() {
                match assigned_meas[k] {
                    Some(j) => {
                        let inn = innovation(&comp.state, meas[j].point.z, meas[j].point.var);
                        let q = innovation_density(&inn);
                        let gain = model.pd * comp.weight * q;
                        comp.weight = (gain / (kappa_at(j) + gain)).min(max_weight);
                        comp.state = joseph_update(&comp.state, &inn, meas[j].point.var);
                    }
                    None => {
                        comp.weight = comp.weight * (1.0 - model.pd)
                            / (1.0 - comp.weight * model.pd).max(1e-12);
                    }
                }
            }
        }
    }

    fn spawn_births(&mut self, meas: &[Measurement], gates: &[Vec<bool>]) {
        let mut centers: Vec<[f64; 2]> = Vec::new();
        for (j, m) in meas.iter().enumerate() {
            if gates.iter().any(|row| row[j]) {
                continue;
            }
            let [cx, cy] = m.point.z;
            let near_comp = self
                .clusters
                .iter()
                .flat_map(|c| &c.components)
                .any(|comp| {
                    comp.weight > 0.2
                        && (comp.state.mean[0] - cx).hypot(comp.state.mean[2] - cy)
                            < self.config.birth_suppression_radius
                });
            if near_comp {
                continue;
            }
            if centers
                .iter()
                .any(|c| (c[0] - cx).hypot(c[1] - cy) < self.config.birth_merge_radius)
            {
                continue;
            }
            centers.push([cx, cy]);
            let state = GaussianState::at(
                cx,
                cy,
                m.point.var,
                self.config.birth_velocity_std * self.config.birth_velocity_std,
            );
            self.clusters.push(CphdCluster {
                components: vec![LabeledComponent {
                    label: self.next_label,
                    weight: self.config.birth_weight,
                    state,
                }],
                cardinality: newborn_cardinality(self.config.birth_weight, self.config.n_max),
            });
            self.next_label += 1;
        }
    }

    fn cleanup(&mut self) {
        let config = self.config;
        for cluster in &mut self.clusters {
            let pre_total = cluster.total_weight();
            cluster
                .components
                .retain(|c| c.weight >= config.prune_weight);
            merge_components(&mut cluster.components, config.merge_distance);
            if cluster.components.len() > config.max_components {
                cluster
                    .components
                    .sort_by(|a, b| b.weight.partial_cmp(&a.weight).unwrap());
                cluster.components.truncate(config.max_components);
            }
            cluster.components.sort_by_key(|c| c.label);
            let post_total = cluster.total_weight();
            if pre_total > 0.0 && post_total < pre_total {
                cluster.cardinality =
                    thin_cardinality(&cluster.cardinality, post_total / pre_total);
            }
        }
        self.clusters.retain(|c| !c.components.is_empty());
        if self.clusters.len() > config.max_clusters {
            let mut order: Vec<usize> = (0..self.clusters.len()).collect();
            order.sort_by(|&a, &b| {
                self.clusters[b]
                    .total_weight()
                    .partial_cmp(&self.clusters[a].total_weight())
                    .unwrap()
            });
            let keep: std::collections::BTreeSet<usize> =
                order.into_iter().take(config.max_clusters).collect();
            let mut idx = 0;
            self.clusters.retain(|_| {
                let kept = keep.contains(&idx);
                idx += 1;
                kept
            });
        }
    }

    /// Emits reports: per cluster, the strongest components above the
    /// report weight, no more of them than the cardinality mode allows.
    fn report(&mut self) {
        for cluster in &self.clusters {
            let mut candidates: Vec<&LabeledComponent> = cluster
                .components
                .iter()
                .filter(|c| c.weight > self.config.report_weight)
                .collect();
            candidates.sort_by(|a, b| {
                b.weight
                    .partial_cmp(&a.weight)
                    .unwrap()
                    .then(a.label.cmp(&b.label))
            });
            let take = candidates.len().min(cluster.map_cardinality());
            for comp in candidates.into_iter().take(take) {
                self.reports.push(Report {
                    frame: self.frame,
                    label: comp.label,
                    state: comp.state.kinematic(),
                });
            }
        }
    }
}

/// Moment-matched merge of components closer than `distance`; the heavier
/// component's label survives.
fn merge_components(components: &mut Vec<LabeledComponent>, distance: f64) {
    let mut order: Vec<usize> = (0..components.len()).collect();
    order.sort_by(|&a, &b| {
        components[b]
            .weight
            .partial_cmp(&components[a].weight)
            .unwrap()
            .then(components[a].label.cmp(&components[b].label))
    });
    let mut absorbed = vec![false; components.len()];
    let mut merged = Vec::with_capacity(components.len());
    for &i in &order {
        if absorbed[i] {
            continue;
        }
        let mut group = vec![i];
        for &j in &order {
            if j == i || absorbed[j] {
                continue;
            }
            let dx = components[i].state.mean[0] - components[j].state.mean[0];
            let dy = components[i].state.mean[2] - components[j].state.mean[2];
            if dx.hypot(dy) < distance {
                absorbed[j] = true;
                group.push(j);
            }
        }
        absorbed[i] = true;
        if group.len() == 1 {
            merged.push(components[i].clone());
            continue;
        }
        let weight: f64 = group.iter().map(|&k| components[k].weight).sum();
        let mut mean = nalgebra::Vector4::zeros();
        for &k in &group {
            mean += components[k].weight * components[k].state.mean;
        }
        mean /= weight;
        let mut cov = nalgebra::Matrix4::zeros();
        for &k in &group {
            let d = components[k].state.mean - mean;
            cov += components[k].weight * (components[k].state.cov + d * d.transpose());
        }
        cov /= weight;
        merged.push(LabeledComponent {
            label: components[i].label,
            weight: weight.min(1.0),
            state: GaussianState::new(mean, cov),
        });
    }
    *components = merged;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::Region;
    use approx::assert_abs_diff_eq;

    fn region() -> Region {
        Region::new(0.0, 400.0, 0.0, 300.0).unwrap()
    }

    fn head_rect_at(x: f64, y: f64) -> Rect {
        Rect::new(x - 15.0, y - 18.0, 30.0, 36.0, Sensor::Head).unwrap()
    }

    /// Exact cardinality posterior by enumeration over target fates: each
    /// of the `n` targets is either undetected or claims one measurement,
    /// leftovers are Poisson clutter. `intensity[j]` is the single-target
    /// evidence integral for measurement `j`, `kappa[j]` its clutter
    /// intensity.
    fn cardinality_oracle(
        prior: &[f64],
        pd: f64,
        intensity: &[f64],
        kappa: &[f64],
    ) -> Option<Vec<f64>> {
        fn fates(
            n: usize,
            remaining: &mut Vec<bool>,
            intensity: &[f64],
            kappa: &[f64],
            pd: f64,
        ) -> f64 {
            if n == 0 {
                return remaining
                    .iter()
                    .enumerate()
                    .filter(|(_, &r)| r)
                    .map(|(j, _)| kappa[j])
                    .product();
            }
            let mut total = (1.0 - pd) * fates(n - 1, remaining, intensity, kappa, pd);
            for j in 0..remaining.len() {
                if remaining[j] {
                    remaining[j] = false;
                    total += pd * intensity[j] * fates(n - 1, remaining, intensity, kappa, pd);
                    remaining[j] = true;
                }
            }
            total
        }
        let mut post: Vec<f64> = prior
            .iter()
            .enumerate()
            .map(|(n, &p)| {
                let mut remaining = vec![true; intensity.len()];
                p * fates(n, &mut remaining, intensity, kappa, pd)
            })
            .collect();
        let total: f64 = post.iter().sum();
        if total <= 0.0 {
            // Every fate is impossible under this prior and evidence.
            return None;
        }
        for v in &mut post {
            *v /= total;
        }
        Some(post)
    }

    #[test]
    fn cardinality_update_matches_fate_enumeration() {
        let area = 120000.0;
        let weights = [0.7, 0.5, 0.25];
        let priors: Vec<Vec<f64>> = vec![
            vec![0.2, 0.3, 0.3, 0.15, 0.05, 0.0, 0.0],
            vec![1.0 / 7.0; 7],
            vec![0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0],
        ];
        // Per-measurement single-component densities q_i(z_j).
        let q: Vec<Vec<f64>> = vec![
            vec![4e-3, 1e-6, 2e-4],
            vec![2e-5, 3e-3, 1e-4],
            vec![1e-4, 2e-4, 5e-3],
        ];
        for clutter_rate in [0.5, 2.0] {
            let kappa_val = clutter_rate / area;
            for pd in [0.3, 0.58, 1.0] {
                for m in 0..=3usize {
                    for prior in &priors {
                        let total_weight: f64 = weights.iter().sum();
                        let evidence: Vec<f64> = (0..m)
                            .map(|j| weights.iter().zip(&q).map(|(w, qs)| w * qs[j]).sum::<f64>())
                            .collect();
                        let xi: Vec<f64> = evidence
                            .iter()
                            .map(|e| clutter_rate / kappa_val * pd * e)
                            .collect();
                        let fast = cardinality_update(prior, total_weight, pd, &xi, clutter_rate);
                        // The oracle sees the normalized spatial density.
                        let intensity: Vec<f64> =
                            evidence.iter().map(|e| e / total_weight).collect();
                        let kappa = vec![kappa_val; m];
                        match cardinality_oracle(prior, pd, &intensity, &kappa) {
                            Some(slow) => {
                                for (a, b) in fast.iter().zip(&slow) {
                                    assert_abs_diff_eq!(a, b, epsilon = 1e-10);
                                }
                            }
                            // Degenerate evidence: the update keeps the
                            // prior rather than dividing by zero.
                            None => assert_eq!(fast, prior.clone()),
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn cardinality_update_with_no_measurements_penalises_large_counts() {
        let prior = vec![0.25, 0.25, 0.25, 0.25];
        let post = cardinality_update(&prior, 1.0, 0.58, &[], 2.0);
        // Seeing nothing makes many targets less likely, monotonically.
        assert!(post[0] > post[1]);
        assert!(post[1] > post[2]);
        assert!(post[2] > post[3]);
        let total: f64 = post.iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn perfect_detection_with_no_measurements_empties_the_cluster() {
        let prior = vec![0.1, 0.6, 0.3];
        let post = cardinality_update(&prior, 1.0, 1.0, &[], 2.0);
        assert_abs_diff_eq!(post[0], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn thinning_preserves_mass_and_scales_mean() {
        let p = vec![0.1, 0.2, 0.4, 0.2, 0.1];
        let thinned = thin_cardinality(&p, 0.6);
        let total: f64 = thinned.iter().sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        let mean = |d: &[f64]| {
            d.iter()
                .enumerate()
                .map(|(n, &v)| n as f64 * v)
                .sum::<f64>()
        };
        assert_abs_diff_eq!(mean(&thinned), 0.6 * mean(&p), epsilon = 1e-12);
        // Keeping everything changes nothing.
        let kept = thin_cardinality(&p, 1.0);
        for (a, b) in kept.iter().zip(&p) {
            assert_abs_diff_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn convolution_shifts_deltas() {
        let a = vec![0.0, 1.0, 0.0, 0.0, 0.0];
        let b = vec![0.0, 0.0, 1.0, 0.0, 0.0];
        let c = convolve_cardinality(&a, &b);
        assert_abs_diff_eq!(c[3], 1.0, epsilon = 1e-12);
    }

    fn clean_models() -> (SensorModel, SensorModel) {
        (
            SensorModel::new(0.95, 0.5, 0.5, 0.0, region()).unwrap(),
            SensorModel::new(0.95, 0.5, 0.5, 0.0, region()).unwrap(),
        )
    }

    #[test]
    fn single_target_locks_with_mode_one_cardinality() {
        let (head, body) = clean_models();
        let mut tracker =
            CphdTracker::new(CphdConfig::default(), MotionModel::default(), head, body);
        for frame in 1..=10 {
            let dets = [head_rect_at(100.0 + frame as f64, 150.0)];
            tracker.step(Some(&dets), Some(&[]));
        }
        assert_eq!(tracker.clusters().len(), 1);
        assert_eq!(tracker.clusters()[0].map_cardinality(), 1);
        let last: Vec<&Report> = tracker.reports().iter().filter(|r| r.frame == 10).collect();
        assert_eq!(last.len(), 1);
        assert_abs_diff_eq!(last[0].state.x, 110.0, epsilon = 5.0);
        assert_abs_diff_eq!(last[0].state.y, 150.0, epsilon = 5.0);
    }

    #[test]
    fn distant_targets_form_separate_clusters() {
        let (head, body) = clean_models();
        let mut tracker =
            CphdTracker::new(CphdConfig::default(), MotionModel::default(), head, body);
        for _ in 1..=8 {
            let dets = [head_rect_at(60.0, 60.0), head_rect_at(320.0, 220.0)];
            tracker.step(Some(&dets), Some(&[]));
        }
        assert_eq!(tracker.clusters().len(), 2);
        let scene = tracker.scene_cardinality();
        let mode = scene
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert_eq!(mode, 2);
        let last: Vec<&Report> = tracker.reports().iter().filter(|r| r.frame == 8).collect();
        assert_eq!(last.len(), 2);
    }

    #[test]
    fn unscheduled_frames_only_predict() {
        let (head, body) = clean_models();
        let mut tracker =
            CphdTracker::new(CphdConfig::default(), MotionModel::default(), head, body);
        for frame in 1..=6 {
            let dets = [head_rect_at(100.0 + 2.0 * frame as f64, 100.0)];
            tracker.step(Some(&dets), Some(&[]));
        }
        let weight_before = tracker.clusters()[0].total_weight();
        tracker.step(None, None);
        let weight_after = tracker.clusters()[0].total_weight();
        assert_abs_diff_eq!(
            weight_after,
            weight_before * CphdConfig::default().survival_prob,
            epsilon = 1e-9
        );
        // Prediction keeps reporting through the gap.
        let gap_frame = tracker.frame();
        assert!(tracker.reports().iter().any(|r| r.frame == gap_frame));
    }

    #[test]
    fn tracker_is_deterministic() {
        let (head, body) = clean_models();
        let run = || {
            let mut tracker =
                CphdTracker::new(CphdConfig::default(), MotionModel::default(), head, body);
            for frame in 1..=15 {
                let dets = [
                    head_rect_at(50.0 + 3.0 * frame as f64, 80.0),
                    head_rect_at(300.0, 200.0),
                ];
                tracker.step(Some(&dets), Some(&[]));
            }
            tracker.reports().to_vec()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn merge_absorbs_near_duplicates() {
        let mut comps = vec![
            LabeledComponent {
                label: 1,
                weight: 0.9,
                state: GaussianState::at(100.0, 100.0, [25.0, 25.0], 900.0),
            },
            LabeledComponent {
                label: 2,
                weight: 0.3,
                state: GaussianState::at(102.0, 101.0, [25.0, 25.0], 900.0),
            },
            LabeledComponent {
                label: 3,
                weight: 0.8,
                state: GaussianState::at(300.0, 100.0, [25.0, 25.0], 900.0),
            },
        ];
        merge_components(&mut comps, 6.0);
        assert_eq!(comps.len(), 2);
        let heavy = comps.iter().find(|c| c.label == 1).unwrap();
        assert_abs_diff_eq!(heavy.weight, 1.0, epsilon = 1e-12);
        // Merged mean sits between the two sources, nearer the heavy one.
        assert!(heavy.state.mean[0] > 100.0 && heavy.state.mean[0] < 101.0);
        assert!(comps.iter().any(|c| c.label == 3));
    }
}

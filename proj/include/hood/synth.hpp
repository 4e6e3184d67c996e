// Synthetic hierarchical Gaussian-mixture data. Leaf class centers are
// drawn level by level (coarse offset + mid offset + fine offset with
// shrinking scales), so classes held out deeper in the hierarchy sit closer
// to the in-distribution clusters and are harder to detect. A far "true
// OOD" cluster and a broad background outlier pool complete the setup.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "hood/core.hpp"
#include "hood/hierarchy.hpp"
#include "hood/records.hpp"
#include "hood/rng.hpp"

namespace hood {

struct SynthConfig {
    std::vector<std::size_t> branching = {4, 3, 2}; // children per node, by level
    std::size_t dims = 8;
    // When non-empty, level k's center offsets are confined to its own
    // block of feature dimensions (block k starts where block k-1 ends).
    // Classes then span the leading sum(level_dims) dimensions and the
    // true-OOD cluster is offset into the remaining ones, so held-out
    // classes stay on the class-feature subspace while true OOD leaves it.
    // Empty = every level perturbs all dimensions and the true-OOD
    // direction is fully random.
    std::vector<std::size_t> level_dims = {};
    std::vector<double> level_scales = {6.0, 2.0, 0.8}; // strictly decreasing dispersions
    double noise_sigma = 0.6;
    // When positive, every emitted feature vector (samples, outliers, true
    // OOD) is rescaled to this Euclidean norm, mimicking the normalized
    // embeddings fine-grained extractors produce. Distances then become
    // purely angular, which keeps detector scores from saturating on far
    // radial extrapolation.
    double norm_radius = 0.0;
    std::size_t train_per_leaf = 200;
    std::size_t test_per_leaf = 50;
    std::vector<std::size_t> holdout_per_level = {1, 1, 1}; // nodes held out at L1..Ld
    double true_ood_offset = 40.0;
    std::size_t true_ood_count = 200;
    std::size_t outlier_count = 2000;
    double outlier_sigma = 12.0; // background pool dispersion
    std::uint64_t seed = 1;
};

inline void validate_synth(const SynthConfig& cfg) {
    if (cfg.branching.empty()) throw ConfigError("synth: branching must have at least one level");
    for (std::size_t b : cfg.branching)
        if (b < 2) throw ConfigError("synth: branching must be >= 2 at each level");
    if (cfg.level_scales.size() != cfg.branching.size())
        throw ConfigError("synth: level_scales must match branching depth");
    for (std::size_t i = 0; i < cfg.level_scales.size(); ++i) {
        if (!(cfg.level_scales[i] > 0.0)) throw ConfigError("synth: level scales must be positive");
        if (i > 0 && !(cfg.level_scales[i - 1] > cfg.level_scales[i]))
            throw ConfigError("synth: level scales must be strictly decreasing");
    }
    if (cfg.holdout_per_level.size() > cfg.branching.size())
        throw ConfigError("synth: more holdout levels than hierarchy depth");
    if (cfg.dims == 0 || cfg.train_per_leaf == 0 || cfg.test_per_leaf == 0)
        throw ConfigError("synth: dims and per-leaf sample counts must be positive");
    if (!cfg.level_dims.empty()) {
        if (cfg.level_dims.size() != cfg.branching.size())
            throw ConfigError("synth: level_dims must match branching depth");
        std::size_t total = 0;
        for (std::size_t d : cfg.level_dims) {
            if (d == 0) throw ConfigError("synth: level_dims entries must be positive");
            total += d;
        }
        if (total > cfg.dims) throw ConfigError("synth: level_dims sum exceeds dims");
    }
    if (!(cfg.noise_sigma > 0.0) || !(cfg.outlier_sigma > 0.0))
        throw ConfigError("synth: noise and outlier sigmas must be positive");
}

struct SynthData {
    LabelHierarchy hierarchy;
    SplitManifest manifest;
    std::vector<FeatureRecord> train; // ID leaves only, true_class set
    std::vector<FeatureRecord> test;  // all memberships
    Matrix outliers;                  // training outlier pool (disjoint from TRUE_OOD)
};

namespace detail {

inline std::string synth_node_id(int level, std::size_t ordinal) {
    return "n" + std::to_string(level) + "_" + std::to_string(ordinal);
}

} // namespace detail

inline SynthData generate_synthetic(const SynthConfig& cfg) {
    validate_synth(cfg);
    Rng rng(derive_seed(cfg.seed, 0x5d4e));

    // Build the rectangular hierarchy: root, then branching[l] children per
    // node at level l.
    std::vector<std::tuple<std::string, std::optional<std::string>, std::string>> specs;
    specs.emplace_back("root", std::nullopt, "root");
    std::vector<std::string> frontier{"root"};
    std::size_t ordinal = 0;
    for (std::size_t level = 0; level < cfg.branching.size(); ++level) {
        std::vector<std::string> next;
        for (const auto& parent : frontier) {
            for (std::size_t c = 0; c < cfg.branching[level]; ++c) {
                std::string id = detail::synth_node_id(static_cast<int>(level) + 1, ordinal++);
                specs.emplace_back(id, parent, id);
                next.push_back(std::move(id));
            }
        }
        frontier = std::move(next);
    }
    LabelHierarchy hierarchy = LabelHierarchy::build(specs);

    // Hold out nodes per level, never nesting and never emptying ID.
    std::vector<std::pair<std::string, HoldoutLevel>> holdouts;
    std::vector<int> held;
    for (std::size_t level = 0; level < cfg.holdout_per_level.size(); ++level) {
        std::vector<int> eligible;
        for (std::size_t i = 0; i < hierarchy.size(); ++i) {
            const int idx = static_cast<int>(i);
            if (hierarchy.node(idx).depth != static_cast<int>(level) + 1) continue;
            bool nested = false;
            for (int hidx : held)
                if (hidx == idx || hierarchy.is_ancestor(hidx, idx) || hierarchy.is_ancestor(idx, hidx))
                    nested = true;
            if (!nested) eligible.push_back(idx);
        }
        for (std::size_t n = 0; n < cfg.holdout_per_level[level]; ++n) {
            if (eligible.empty())
                throw ConfigError("synth: cannot satisfy holdout rule at level " +
                                  std::to_string(level + 1));
            const std::size_t pick = static_cast<std::size_t>(rng.uniform_int(eligible.size()));
            const int idx = eligible[pick];
            holdouts.emplace_back(hierarchy.node(idx).id, static_cast<HoldoutLevel>(level + 1));
            held.push_back(idx);
            std::vector<int> still;
            for (int e : eligible)
                if (e != idx && !hierarchy.is_ancestor(idx, e)) still.push_back(e);
            eligible = std::move(still);
        }
    }
    const SplitPlan plan = compile_split(hierarchy, holdouts);
    SplitManifest manifest = emit_manifest(plan);

    // Leaf centers, drawn level by level along each root-to-leaf path. With
    // per-level dimension blocks, a node's offset touches only its level's
    // block; the blocks are laid out back to back from dimension 0.
    std::vector<std::pair<std::size_t, std::size_t>> blocks; // [lo, hi) per level
    std::size_t span = cfg.dims;
    if (cfg.level_dims.empty()) {
        for (std::size_t l = 0; l < cfg.branching.size(); ++l) blocks.emplace_back(0, cfg.dims);
    } else {
        std::size_t lo = 0;
        for (std::size_t l = 0; l < cfg.level_dims.size(); ++l) {
            blocks.emplace_back(lo, lo + cfg.level_dims[l]);
            lo += cfg.level_dims[l];
        }
        span = lo;
    }
    // Offsets have a uniformly random direction within the level's block and
    // a fixed magnitude of scale * sqrt(block width), i.e. the typical norm
    // of a Gaussian draw at that scale. Fixing the magnitude keeps the
    // difficulty gradient between levels stable across seeds.
    std::map<std::string, std::vector<double>> center_by_node;
    center_by_node["root"] = std::vector<double>(cfg.dims, 0.0);
    for (const auto& n : hierarchy.nodes()) {
        if (n.parent < 0) continue;
        const auto& parent_center = center_by_node.at(hierarchy.node(n.parent).id);
        const auto level = static_cast<std::size_t>(n.depth) - 1;
        const auto [lo, hi] = blocks[level];
        const double radius =
            cfg.level_scales[level] * std::sqrt(static_cast<double>(hi - lo));
        std::vector<double> offset(hi - lo);
        double norm = 0.0;
        do {
            norm = 0.0;
            for (auto& v : offset) {
                v = rng.normal();
                norm += v * v;
            }
            norm = std::sqrt(norm);
        } while (norm < 1e-12);
        std::vector<double> c = parent_center;
        for (std::size_t d = lo; d < hi; ++d) c[d] = parent_center[d] + offset[d - lo] * radius / norm;
        center_by_node[n.id] = std::move(c);
    }

    std::map<std::string, int> class_index;
    for (std::size_t i = 0; i < manifest.id_classes.size(); ++i)
        class_index[manifest.id_classes[i]] = static_cast<int>(i);

    std::map<std::string, Membership> leaf_membership;
    for (const auto& leaf : manifest.id_classes) leaf_membership[leaf] = Membership::Id;
    for (const auto& [level, leaves] : manifest.ood_sets) {
        const Membership m = level == HoldoutLevel::L1   ? Membership::OodL1
                             : level == HoldoutLevel::L2 ? Membership::OodL2
                                                         : Membership::OodL3;
        for (const auto& leaf : leaves) leaf_membership[leaf] = m;
    }

    SynthData data;
    data.hierarchy = hierarchy;
    data.manifest = manifest;

    auto sample_point = [&](const std::vector<double>& center) {
        std::vector<double> x(cfg.dims);
        for (std::size_t d = 0; d < cfg.dims; ++d) x[d] = center[d] + rng.normal(0.0, cfg.noise_sigma);
        if (cfg.norm_radius > 0.0) {
            double norm = 0.0;
            for (double v : x) norm += v * v;
            norm = std::sqrt(norm);
            if (norm > 1e-12)
                for (double& v : x) v *= cfg.norm_radius / norm;
        }
        return x;
    };

    // Deterministic order: leaves sorted by node id (manifest order).
    std::vector<std::string> all_leaves = manifest.id_classes;
    for (const auto& [level, leaves] : manifest.ood_sets)
        all_leaves.insert(all_leaves.end(), leaves.begin(), leaves.end());
    std::sort(all_leaves.begin(), all_leaves.end());

    std::size_t train_counter = 0, test_counter = 0;
    for (const auto& leaf : all_leaves) {
        const auto& center = center_by_node.at(leaf);
        const Membership membership = leaf_membership.at(leaf);
        if (membership == Membership::Id) {
            const int cls = class_index.at(leaf);
            for (std::size_t s = 0; s < cfg.train_per_leaf; ++s) {
                FeatureRecord r;
                r.record_id = "train_" + std::to_string(train_counter++);
                r.membership = Membership::Id;
                r.x = sample_point(center);
                r.true_class = cls;
                data.train.push_back(std::move(r));
            }
        }
        for (std::size_t s = 0; s < cfg.test_per_leaf; ++s) {
            FeatureRecord r;
            r.record_id = "test_" + std::to_string(test_counter++);
            r.membership = membership;
            r.x = sample_point(center);
            if (membership == Membership::Id) r.true_class = class_index.at(leaf);
            data.test.push_back(std::move(r));
        }
    }

    // True-OOD cluster at a fixed distance from the hierarchy origin. With a
    // class subspace configured the offset points into the orthogonal
    // dimensions; otherwise the direction is fully random.
    if (cfg.true_ood_count > 0) {
        const std::size_t dir_lo = span < cfg.dims ? span : 0;
        std::vector<double> dir(cfg.dims, 0.0);
        double norm = 0.0;
        do {
            norm = 0.0;
            for (std::size_t d = dir_lo; d < cfg.dims; ++d) {
                dir[d] = rng.normal();
                norm += dir[d] * dir[d];
            }
            norm = std::sqrt(norm);
        } while (norm < 1e-12);
        std::vector<double> center(cfg.dims);
        for (std::size_t d = 0; d < cfg.dims; ++d)
            center[d] = cfg.true_ood_offset * dir[d] / norm;
        for (std::size_t s = 0; s < cfg.true_ood_count; ++s) {
            FeatureRecord r;
            r.record_id = "test_" + std::to_string(test_counter++);
            r.membership = Membership::TrueOod;
            r.x = sample_point(center);
            data.test.push_back(std::move(r));
        }
    }

    // Broad background pool for outlier-exposure training. Drawn from its
    // own distribution, disjoint from the TRUE_OOD test cluster.
    data.outliers = Matrix(cfg.outlier_count, cfg.dims);
    for (std::size_t r = 0; r < cfg.outlier_count; ++r) {
        double norm = 0.0;
        for (std::size_t d = 0; d < cfg.dims; ++d) {
            data.outliers(r, d) = rng.normal(0.0, cfg.outlier_sigma);
            norm += data.outliers(r, d) * data.outliers(r, d);
        }
        if (cfg.norm_radius > 0.0 && (norm = std::sqrt(norm)) > 1e-12)
            for (std::size_t d = 0; d < cfg.dims; ++d)
                data.outliers(r, d) *= cfg.norm_radius / norm;
    }

    return data;
}

} // namespace hood

// Label taxonomy parsing and ID/OOD split compilation.
//
// A hierarchy is a rooted tree of named label nodes. Leaves are the
// finest-grained classes and must all sit at the same depth (rectangular
// taxonomy). Holding out a node at depth k marks every leaf underneath it
// as OOD level Lk; the remaining leaves form the in-distribution class set.
#pragma once

#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "hood/core.hpp"

namespace hood {

enum class HoldoutLevel : int { L1 = 1, L2 = 2, L3 = 3 };

inline const char* holdout_level_name(HoldoutLevel l) {
    switch (l) {
        case HoldoutLevel::L1: return "L1";
        case HoldoutLevel::L2: return "L2";
        case HoldoutLevel::L3: return "L3";
    }
    return "?";
}

inline HoldoutLevel holdout_level_from_name(const std::string& s) {
    if (s == "L1" || s == "1") return HoldoutLevel::L1;
    if (s == "L2" || s == "2") return HoldoutLevel::L2;
    if (s == "L3" || s == "3") return HoldoutLevel::L3;
    throw DataError("unknown holdout level '" + s + "' (expected L1, L2 or L3)");
}

class ParseError : public DataError {
public:
    enum class Code {
        Empty,
        BadLine,
        BadIndent,
        MultipleRoots,
        NoRoot,
        DuplicateId,
        MissingParent,
        Cycle,
        RaggedDepth,
    };

    ParseError(Code code, const std::string& msg) : DataError(msg), code_(code) {}
    Code code() const { return code_; }

private:
    Code code_;
};

class SplitError : public DataError {
public:
    enum class Code { UnknownNode, LevelDepthMismatch, NestedHoldout, EmptyId };

    SplitError(Code code, const std::string& msg) : DataError(msg), code_(code) {}
    Code code() const { return code_; }

private:
    Code code_;
};

struct HierarchyNode {
    std::string id;
    std::string name;
    int parent = -1; // index, -1 for the root
    int depth = 0;   // root = 0, its children = 1
    std::vector<int> children;
};

class LabelHierarchy {
public:
    // Builds and validates a tree from (id, parent_id, display_name) triples.
    static LabelHierarchy build(
        const std::vector<std::tuple<std::string, std::optional<std::string>, std::string>>& specs) {
        if (specs.empty()) throw ParseError(ParseError::Code::Empty, "hierarchy spec has no nodes");

        LabelHierarchy h;
        std::map<std::string, int> index;
        for (const auto& [id, parent, name] : specs) {
            if (index.count(id))
                throw ParseError(ParseError::Code::DuplicateId, "duplicate node id '" + id + "'");
            index[id] = static_cast<int>(h.nodes_.size());
            HierarchyNode n;
            n.id = id;
            n.name = name.empty() ? id : name;
            h.nodes_.push_back(std::move(n));
        }

        int root = -1;
        for (std::size_t i = 0; i < specs.size(); ++i) {
            const auto& parent = std::get<1>(specs[i]);
            if (!parent.has_value()) {
                if (root >= 0)
                    throw ParseError(ParseError::Code::MultipleRoots,
                                     "multiple roots: '" + h.nodes_[static_cast<std::size_t>(root)].id +
                                         "' and '" + h.nodes_[i].id + "'");
                root = static_cast<int>(i);
                continue;
            }
            auto it = index.find(*parent);
            if (it == index.end())
                throw ParseError(ParseError::Code::MissingParent,
                                 "node '" + h.nodes_[i].id + "' references missing parent '" + *parent + "'");
            h.nodes_[i].parent = it->second;
        }
        if (root < 0) throw ParseError(ParseError::Code::NoRoot, "hierarchy spec has no root node");
        h.root_ = root;

        // Depth assignment doubles as cycle detection: a node whose parent
        // chain never reaches the root is on (or under) a cycle.
        for (std::size_t i = 0; i < h.nodes_.size(); ++i) {
            int steps = 0;
            int cur = static_cast<int>(i);
            while (cur != root) {
                cur = h.nodes_[static_cast<std::size_t>(cur)].parent;
                if (cur < 0 || ++steps > static_cast<int>(h.nodes_.size()))
                    throw ParseError(ParseError::Code::Cycle,
                                     "node '" + h.nodes_[i].id + "' is part of a parent cycle");
            }
            h.nodes_[i].depth = steps;
        }

        for (std::size_t i = 0; i < h.nodes_.size(); ++i)
            if (h.nodes_[i].parent >= 0)
                h.nodes_[static_cast<std::size_t>(h.nodes_[i].parent)].children.push_back(
                    static_cast<int>(i));

        int leaf_depth = -1;
        for (const auto& n : h.nodes_) {
            if (!n.children.empty()) continue;
            if (leaf_depth < 0) leaf_depth = n.depth;
            if (n.depth != leaf_depth)
                throw ParseError(ParseError::Code::RaggedDepth,
                                 "leaf '" + n.id + "' at depth " + std::to_string(n.depth) +
                                     ", expected uniform leaf depth " + std::to_string(leaf_depth));
        }
        h.leaf_depth_ = leaf_depth;
        return h;
    }

    const std::string& id() const { return nodes_[static_cast<std::size_t>(root_)].id; }
    int root() const { return root_; }
    int leaf_depth() const { return leaf_depth_; }
    std::size_t size() const { return nodes_.size(); }
    const HierarchyNode& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
    const std::vector<HierarchyNode>& nodes() const { return nodes_; }

    int find(const std::string& id) const {
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            if (nodes_[i].id == id) return static_cast<int>(i);
        return -1;
    }

    bool is_leaf(int i) const { return nodes_[static_cast<std::size_t>(i)].children.empty(); }

    std::vector<int> leaves() const {
        std::vector<int> out;
        for (std::size_t i = 0; i < nodes_.size(); ++i)
            if (nodes_[i].children.empty()) out.push_back(static_cast<int>(i));
        return out;
    }

    std::size_t count_at_depth(int depth) const {
        std::size_t n = 0;
        for (const auto& node : nodes_)
            if (node.depth == depth) ++n;
        return n;
    }

    // True if a is a strict ancestor of b.
    bool is_ancestor(int a, int b) const {
        int cur = nodes_[static_cast<std::size_t>(b)].parent;
        while (cur >= 0) {
            if (cur == a) return true;
            cur = nodes_[static_cast<std::size_t>(cur)].parent;
        }
        return false;
    }

    std::vector<int> descendant_leaves(int a) const {
        std::vector<int> out;
        collect_leaves(a, out);
        return out;
    }

private:
    void collect_leaves(int i, std::vector<int>& out) const {
        const auto& n = nodes_[static_cast<std::size_t>(i)];
        if (n.children.empty()) {
            out.push_back(i);
            return;
        }
        for (int c : n.children) collect_leaves(c, out);
    }

    std::vector<HierarchyNode> nodes_;
    int root_ = -1;
    int leaf_depth_ = -1;
};

namespace detail {

// Line-oriented format: one node per line, two spaces of indentation per
// depth step, first token is the node id, the remainder (optional) is the
// display name. '#' starts a comment.
inline LabelHierarchy parse_hierarchy_text(std::string_view text) {
    std::vector<std::tuple<std::string, std::optional<std::string>, std::string>> specs;
    std::vector<std::pair<int, std::string>> stack; // (depth, id) of open ancestors

    std::istringstream in{std::string(text)};
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::size_t indent = 0;
        while (indent < line.size() && line[indent] == ' ') ++indent;
        if (line.find('\t') != std::string::npos)
            throw ParseError(ParseError::Code::BadIndent,
                             "line " + std::to_string(lineno) + ": tabs are not allowed in indentation");
        std::string body = line.substr(indent);
        while (!body.empty() && (body.back() == ' ' || body.back() == '\r')) body.pop_back();
        if (body.empty()) continue;

        if (indent % 2 != 0)
            throw ParseError(ParseError::Code::BadIndent,
                             "line " + std::to_string(lineno) + ": odd indentation width");
        const int depth = static_cast<int>(indent / 2);

        const auto sp = body.find(' ');
        std::string id = body.substr(0, sp);
        std::string name = sp == std::string::npos ? "" : body.substr(sp + 1);
        while (!name.empty() && name.front() == ' ') name.erase(name.begin());

        if (depth == 0) {
            specs.emplace_back(id, std::nullopt, name);
            stack.assign(1, {0, id});
            continue;
        }
        if (specs.empty())
            throw ParseError(ParseError::Code::NoRoot,
                             "line " + std::to_string(lineno) + ": node '" + id + "' appears before any root");
        while (!stack.empty() && stack.back().first >= depth) stack.pop_back();
        if (stack.empty() || stack.back().first != depth - 1)
            throw ParseError(ParseError::Code::BadIndent,
                             "line " + std::to_string(lineno) + ": node '" + id +
                                 "' skips a hierarchy level");
        specs.emplace_back(id, stack.back().second, name);
        stack.emplace_back(depth, id);
    }
    return LabelHierarchy::build(specs);
}

inline LabelHierarchy parse_hierarchy_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("nodes") || !j.at("nodes").is_array())
        throw ParseError(ParseError::Code::BadLine, "hierarchy object must contain a 'nodes' array");
    std::vector<std::tuple<std::string, std::optional<std::string>, std::string>> specs;
    for (const auto& n : j.at("nodes")) {
        std::optional<std::string> parent;
        if (n.contains("parent") && !n.at("parent").is_null())
            parent = n.at("parent").get<std::string>();
        specs.emplace_back(n.at("id").get<std::string>(), parent,
                           n.value("name", std::string{}));
    }
    return LabelHierarchy::build(specs);
}

} // namespace detail

// Accepts both the indented text format and the JSON object format; JSON is
// detected by a leading '{'.
inline LabelHierarchy parse_hierarchy(std::string_view text) {
    for (char c : text) {
        if (c == ' ' || c == '\n' || c == '\r' || c == '\t') continue;
        if (c == '{') return detail::parse_hierarchy_json(nlohmann::json::parse(text));
        break;
    }
    return detail::parse_hierarchy_text(text);
}

inline nlohmann::json hierarchy_to_json(const LabelHierarchy& h) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : h.nodes()) {
        nlohmann::json jn;
        jn["id"] = n.id;
        jn["parent"] = n.parent < 0 ? nlohmann::json(nullptr) : nlohmann::json(h.node(n.parent).id);
        jn["name"] = n.name;
        nodes.push_back(std::move(jn));
    }
    return nlohmann::json{{"version", 1}, {"nodes", std::move(nodes)}};
}

struct SplitPlan {
    std::string hierarchy_id;
    std::vector<std::pair<std::string, HoldoutLevel>> holdouts; // sorted by node id
    std::vector<std::string> id_leaves;                          // sorted
    std::map<HoldoutLevel, std::vector<std::string>> ood_leaves; // levels present only
};

inline SplitPlan compile_split(const LabelHierarchy& h,
                               std::vector<std::pair<std::string, HoldoutLevel>> holdouts) {
    std::vector<int> holdout_idx;
    holdout_idx.reserve(holdouts.size());
    for (const auto& [id, level] : holdouts) {
        const int idx = h.find(id);
        if (idx < 0)
            throw SplitError(SplitError::Code::UnknownNode, "holdout node '" + id + "' not in hierarchy");
        const int depth = h.node(idx).depth;
        if (depth != static_cast<int>(level))
            throw SplitError(SplitError::Code::LevelDepthMismatch,
                             "holdout '" + id + "' declared " + holdout_level_name(level) +
                                 " but sits at depth " + std::to_string(depth));
        holdout_idx.push_back(idx);
    }
    for (std::size_t a = 0; a < holdout_idx.size(); ++a)
        for (std::size_t b = 0; b < holdout_idx.size(); ++b) {
            if (a == b) continue;
            if (holdout_idx[a] == holdout_idx[b] && a < b)
                throw SplitError(SplitError::Code::NestedHoldout,
                                 "node '" + holdouts[a].first + "' held out twice");
            if (h.is_ancestor(holdout_idx[a], holdout_idx[b]))
                throw SplitError(SplitError::Code::NestedHoldout,
                                 "held-out node '" + holdouts[b].first + "' is a descendant of held-out '" +
                                     holdouts[a].first + "'");
        }

    SplitPlan plan;
    plan.hierarchy_id = h.id();
    std::sort(holdouts.begin(), holdouts.end());
    plan.holdouts = std::move(holdouts);

    // Leaf partition: a leaf belongs to level Lk of its held-out
    // ancestor-or-self (unique because holdouts cannot nest), else to ID.
    std::map<std::string, HoldoutLevel> holdout_by_id;
    for (const auto& [id, level] : plan.holdouts) holdout_by_id[id] = level;

    for (int leaf : h.leaves()) {
        std::optional<HoldoutLevel> hit;
        int cur = leaf;
        while (cur >= 0) {
            auto it = holdout_by_id.find(h.node(cur).id);
            if (it != holdout_by_id.end()) {
                hit = it->second;
                break;
            }
            cur = h.node(cur).parent;
        }
        if (hit)
            plan.ood_leaves[*hit].push_back(h.node(leaf).id);
        else
            plan.id_leaves.push_back(h.node(leaf).id);
    }
    std::sort(plan.id_leaves.begin(), plan.id_leaves.end());
    for (auto& [level, leaves] : plan.ood_leaves) std::sort(leaves.begin(), leaves.end());

    if (plan.id_leaves.empty())
        throw SplitError(SplitError::Code::EmptyId, "holdout set leaves no in-distribution classes");
    return plan;
}

// Frozen, serializable form of a compiled split. Class indices are the
// positions in id_classes (dense 0..K-1, lexicographic by node id).
struct SplitManifest {
    std::string hierarchy_id;
    std::string rule_hash;
    std::vector<std::string> id_classes;
    std::map<HoldoutLevel, std::vector<std::string>> ood_sets;

    bool operator==(const SplitManifest&) const = default;
};

inline SplitManifest emit_manifest(const SplitPlan& plan) {
    SplitManifest m;
    m.hierarchy_id = plan.hierarchy_id;
    m.id_classes = plan.id_leaves;
    m.ood_sets = plan.ood_leaves;

    std::string canon = plan.hierarchy_id;
    for (const auto& [id, level] : plan.holdouts) {
        canon += '\n';
        canon += id;
        canon += '=';
        canon += holdout_level_name(level);
    }
    m.rule_hash = to_hex(fnv1a64(canon));
    return m;
}

inline nlohmann::json manifest_to_json(const SplitManifest& m) {
    nlohmann::json ood = nlohmann::json::object();
    for (const auto& [level, leaves] : m.ood_sets) ood[holdout_level_name(level)] = leaves;
    return nlohmann::json{{"version", 1},
                          {"hierarchy_id", m.hierarchy_id},
                          {"rule_hash", m.rule_hash},
                          {"id_classes", m.id_classes},
                          {"ood_sets", std::move(ood)}};
}

inline SplitManifest manifest_from_json(const nlohmann::json& j) {
    SplitManifest m;
    try {
        if (j.at("version").get<int>() != 1)
            throw DataError("unsupported manifest version");
        m.hierarchy_id = j.at("hierarchy_id").get<std::string>();
        m.rule_hash = j.at("rule_hash").get<std::string>();
        m.id_classes = j.at("id_classes").get<std::vector<std::string>>();
        for (const auto& [key, value] : j.at("ood_sets").items())
            m.ood_sets[holdout_level_from_name(key)] = value.get<std::vector<std::string>>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed manifest: ") + e.what());
    }
    return m;
}

inline std::string manifest_to_string(const SplitManifest& m) {
    return manifest_to_json(m).dump(2) + "\n";
}

inline SplitManifest manifest_from_string(const std::string& s) {
    return manifest_from_json(nlohmann::json::parse(s));
}

} // namespace hood

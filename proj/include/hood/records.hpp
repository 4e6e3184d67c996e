// Sample records shared by scoring, metrics and file I/O.
#pragma once

#include <optional>
#include <string>
#include <vector>

#include "hood/core.hpp"

namespace hood {

enum class Membership { Id, OodL1, OodL2, OodL3, TrueOod };

inline const char* membership_name(Membership m) {
    switch (m) {
        case Membership::Id: return "ID";
        case Membership::OodL1: return "OOD_L1";
        case Membership::OodL2: return "OOD_L2";
        case Membership::OodL3: return "OOD_L3";
        case Membership::TrueOod: return "TRUE_OOD";
    }
    return "?";
}

inline Membership membership_from_name(const std::string& s) {
    if (s == "ID") return Membership::Id;
    if (s == "OOD_L1") return Membership::OodL1;
    if (s == "OOD_L2") return Membership::OodL2;
    if (s == "OOD_L3") return Membership::OodL3;
    if (s == "TRUE_OOD") return Membership::TrueOod;
    throw DataError("unknown membership tag '" + s + "'");
}

inline bool is_semantic_ood(Membership m) {
    return m == Membership::OodL1 || m == Membership::OodL2 || m == Membership::OodL3;
}

// One evaluated sample: either raw logits (scored downstream) or an already
// computed detector score. true_class is set only for labeled ID samples.
struct ScoreRecord {
    std::string record_id;
    Membership membership = Membership::Id;
    std::vector<double> logits;          // empty if pre-scored
    std::optional<double> score;
    std::optional<int> true_class;
};

// One raw sample as produced by the synthetic generator: features plus the
// membership tag it will carry through evaluation.
struct FeatureRecord {
    std::string record_id;
    Membership membership = Membership::Id;
    std::vector<double> x;
    std::optional<int> true_class;
};

} // namespace hood

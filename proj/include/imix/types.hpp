#pragma once

#include <cstddef>
#include <string>

#include "imix/error.hpp"

namespace imix {

enum class TaskKind { Multiclass, Multilabel, Regression };

inline std::string to_string(TaskKind t) {
    switch (t) {
        case TaskKind::Multiclass: return "multiclass";
        case TaskKind::Multilabel: return "multilabel";
        case TaskKind::Regression: return "regression";
    }
    return "?";
}

inline TaskKind task_kind_from_string(const std::string& s) {
    if (s == "multiclass") return TaskKind::Multiclass;
    if (s == "multilabel") return TaskKind::Multilabel;
    if (s == "regression") return TaskKind::Regression;
    throw ConfigError("unknown task kind: " + s);
}

enum class ExpertKind { Uniqueness, Synergy, Redundancy };

// Identifies one interaction expert; modality is 1-based and only
// meaningful for uniqueness experts.
struct ExpertId {
    ExpertKind kind = ExpertKind::Synergy;
    int modality = 0;

    static ExpertId uniqueness(int modality) { return {ExpertKind::Uniqueness, modality}; }
    static ExpertId synergy() { return {ExpertKind::Synergy, 0}; }
    static ExpertId redundancy() { return {ExpertKind::Redundancy, 0}; }

    std::string label() const {
        switch (kind) {
            case ExpertKind::Uniqueness: return "uniqueness_" + std::to_string(modality);
            case ExpertKind::Synergy: return "synergy";
            case ExpertKind::Redundancy: return "redundancy";
        }
        return "?";
    }

    friend bool operator==(const ExpertId& a, const ExpertId& b) {
        return a.kind == b.kind && (a.kind != ExpertKind::Uniqueness || a.modality == b.modality);
    }
};

inline ExpertId expert_id_from_label(const std::string& s) {
    if (s == "synergy") return ExpertId::synergy();
    if (s == "redundancy") return ExpertId::redundancy();
    if (s.rfind("uniqueness_", 0) == 0 && s.size() > 11)
        return ExpertId::uniqueness(std::stoi(s.substr(11)));
    throw ConfigError("unknown expert label: " + s);
}

enum class MaskStrategy { Random, Mean, Zero };

inline std::string to_string(MaskStrategy m) {
    switch (m) {
        case MaskStrategy::Random: return "random";
        case MaskStrategy::Mean: return "mean";
        case MaskStrategy::Zero: return "zero";
    }
    return "?";
}

inline MaskStrategy mask_strategy_from_string(const std::string& s) {
    if (s == "random") return MaskStrategy::Random;
    if (s == "mean") return MaskStrategy::Mean;
    if (s == "zero") return MaskStrategy::Zero;
    throw ConfigError("unknown mask strategy: " + s);
}

}  // namespace imix

#pragma once

#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "imix/dataset.hpp"
#include "imix/error.hpp"
#include "imix/types.hpp"

namespace imix {

// Finite joint distribution p(x1, x2, t) over small alphabets.
struct DiscreteJoint {
    std::size_t n1 = 2, n2 = 2, nt = 2;
    std::vector<double> p;  // [x1][x2][t], row-major

    DiscreteJoint() = default;
    DiscreteJoint(std::size_t n1_, std::size_t n2_, std::size_t nt_)
        : n1(n1_), n2(n2_), nt(nt_), p(n1_ * n2_ * nt_, 0.0) {}

    double& at(std::size_t x1, std::size_t x2, std::size_t t) {
        return p[(x1 * n2 + x2) * nt + t];
    }
    double at(std::size_t x1, std::size_t x2, std::size_t t) const {
        return p[(x1 * n2 + x2) * nt + t];
    }

    void validate() const {
        if (n1 == 0 || n2 == 0 || nt == 0 || n1 > 16 || n2 > 16 || nt > 16)
            throw ContractError("joint: alphabet sizes must be in 1..16");
        if (p.size() != n1 * n2 * nt) throw ContractError("joint: table size mismatch");
        double s = 0.0;
        for (double v : p) {
            if (v < 0.0) throw ContractError("joint: negative probability");
            s += v;
        }
        if (std::abs(s - 1.0) > 1e-12)
            throw ContractError("joint: probabilities sum to " + std::to_string(s));
    }

    std::vector<double> marginal_t() const {
        std::vector<double> pt(nt, 0.0);
        for (std::size_t a = 0; a < n1; ++a)
            for (std::size_t b = 0; b < n2; ++b)
                for (std::size_t t = 0; t < nt; ++t) pt[t] += at(a, b, t);
        return pt;
    }
};

// Williams-Beer decomposition in bits: I_min redundancy, per-source
// unique terms and the synergy remainder.
struct PidResult {
    double red = 0.0, unq1 = 0.0, unq2 = 0.0, syn = 0.0;
    double total_mi = 0.0;
};

enum class MiTarget { X1, X2, X1X2 };

namespace detail {

inline double plog2(double x) { return x > 0.0 ? std::log2(x) : 0.0; }

}  // namespace detail

// Shannon mutual information I(T; source) in bits; 0 log 0 = 0.
inline double mutual_info(const DiscreteJoint& j, MiTarget which) {
    j.validate();
    const auto pt = j.marginal_t();
    double mi = 0.0;
    if (which == MiTarget::X1X2) {
        std::vector<double> pxy(j.n1 * j.n2, 0.0);
        for (std::size_t a = 0; a < j.n1; ++a)
            for (std::size_t b = 0; b < j.n2; ++b)
                for (std::size_t t = 0; t < j.nt; ++t) pxy[a * j.n2 + b] += j.at(a, b, t);
        for (std::size_t a = 0; a < j.n1; ++a)
            for (std::size_t b = 0; b < j.n2; ++b)
                for (std::size_t t = 0; t < j.nt; ++t) {
                    const double pj = j.at(a, b, t);
                    if (pj > 0.0)
                        mi += pj * detail::plog2(pj / (pxy[a * j.n2 + b] * pt[t]));
                }
        return mi;
    }
    const bool first = which == MiTarget::X1;
    const std::size_t na = first ? j.n1 : j.n2;
    std::vector<double> pa(na, 0.0), pat(na * j.nt, 0.0);
    for (std::size_t a = 0; a < j.n1; ++a)
        for (std::size_t b = 0; b < j.n2; ++b)
            for (std::size_t t = 0; t < j.nt; ++t) {
                const std::size_t s = first ? a : b;
                pa[s] += j.at(a, b, t);
                pat[s * j.nt + t] += j.at(a, b, t);
            }
    for (std::size_t s = 0; s < na; ++s)
        for (std::size_t t = 0; t < j.nt; ++t) {
            const double pj = pat[s * j.nt + t];
            if (pj > 0.0) mi += pj * detail::plog2(pj / (pa[s] * pt[t]));
        }
    return mi;
}

// Specific information of source A about outcome T = t:
// sum_a p(a|t) [log(1/p(t)) - log(1/p(t|a))].
namespace detail {

inline double specific_info(const DiscreteJoint& j, bool first_source, std::size_t t,
                            const std::vector<double>& pt) {
    const std::size_t na = first_source ? j.n1 : j.n2;
    std::vector<double> pa(na, 0.0), pat(na, 0.0);
    for (std::size_t a = 0; a < j.n1; ++a)
        for (std::size_t b = 0; b < j.n2; ++b) {
            const std::size_t s = first_source ? a : b;
            for (std::size_t tt = 0; tt < j.nt; ++tt) pa[s] += j.at(a, b, tt);
            pat[s] += j.at(a, b, t);
        }
    if (pt[t] <= 0.0) return 0.0;
    double si = 0.0;
    for (std::size_t s = 0; s < na; ++s) {
        if (pat[s] <= 0.0) continue;
        const double p_a_given_t = pat[s] / pt[t];
        const double p_t_given_a = pat[s] / pa[s];
        si += p_a_given_t * (std::log2(1.0 / pt[t]) - std::log2(1.0 / p_t_given_a));
    }
    return si;
}

}  // namespace detail

// I_min redundancy: expected minimum specific information over sources.
inline double redundancy_imin(const DiscreteJoint& j) {
    j.validate();
    const auto pt = j.marginal_t();
    double red = 0.0;
    for (std::size_t t = 0; t < j.nt; ++t) {
        if (pt[t] <= 0.0) continue;
        red += pt[t] * std::min(detail::specific_info(j, true, t, pt),
                                detail::specific_info(j, false, t, pt));
    }
    return red;
}

inline PidResult pid_decompose(const DiscreteJoint& j) {
    PidResult r;
    r.red = redundancy_imin(j);
    r.total_mi = mutual_info(j, MiTarget::X1X2);
    r.unq1 = mutual_info(j, MiTarget::X1) - r.red;
    r.unq2 = mutual_info(j, MiTarget::X2) - r.red;
    r.syn = r.total_mi - r.unq1 - r.unq2 - r.red;
    auto clamp = [](double& x) {
        if (x < 0.0 && x > -1e-12) x = 0.0;
    };
    clamp(r.red);
    clamp(r.unq1);
    clamp(r.unq2);
    clamp(r.syn);
    return r;
}

// Names the strictly dominant PID component of the joint.
inline ExpertId classify_dominant(const DiscreteJoint& j) {
    const PidResult r = pid_decompose(j);
    if (r.total_mi < 1e-9)
        throw ContractError("classify_dominant: joint carries no information about the target");
    struct Entry { double v; ExpertId id; };
    std::vector<Entry> es = {{r.unq1, ExpertId::uniqueness(1)},
                             {r.unq2, ExpertId::uniqueness(2)},
                             {r.syn, ExpertId::synergy()},
                             {r.red, ExpertId::redundancy()}};
    std::size_t best = 0;
    for (std::size_t i = 1; i < es.size(); ++i)
        if (es[i].v > es[best].v) best = i;
    for (std::size_t i = 0; i < es.size(); ++i)
        if (i != best && es[best].v - es[i].v < 1e-9)
            throw ContractError("classify_dominant: ambiguous, " + es[best].id.label() + " ties " +
                                es[i].id.label());
    return es[best].id;
}

// Noiseless discretized joint of a 2-modality single-interaction
// generator: sign of the informative coordinate of each modality,
// computed analytically rather than sampled.
inline DiscreteJoint analytic_joint(const GenSpec& spec) {
    if (spec.dims.size() != 2)
        throw ContractError("analytic_joint: oracle is limited to 2 modalities");
    DiscreteJoint j(2, 2, 2);
    switch (spec.kind) {
        case GenKind::Unique: {
            // Informative modality copies the label; the other is an
            // independent uniform sign.
            const bool first = spec.unique_k == 1;
            for (std::size_t z = 0; z < 2; ++z)
                for (std::size_t o = 0; o < 2; ++o) {
                    if (first) j.at(z, o, z) = 0.25;
                    else j.at(o, z, z) = 0.25;
                }
            break;
        }
        case GenKind::Redundant:
            j.at(0, 0, 0) = 0.5;
            j.at(1, 1, 1) = 0.5;
            break;
        case GenKind::SynergyXor:
            for (std::size_t a = 0; a < 2; ++a)
                for (std::size_t b = 0; b < 2; ++b) j.at(a, b, a ^ b) = 0.25;
            break;
        case GenKind::Mixture: {
            GenSpec sub = spec;
            DiscreteJoint mix(2, 2, 2);
            for (std::size_t i = 0; i < spec.proportions.size(); ++i) {
                if (spec.proportions[i] <= 0.0) continue;
                if (i < 2) {
                    sub.kind = GenKind::Unique;
                    sub.unique_k = static_cast<int>(i) + 1;
                } else if (i == 2) {
                    sub.kind = GenKind::SynergyXor;
                } else {
                    sub.kind = GenKind::Redundant;
                }
                const DiscreteJoint part = analytic_joint(sub);
                for (std::size_t k = 0; k < mix.p.size(); ++k)
                    mix.p[k] += spec.proportions[i] * part.p[k];
            }
            return mix;
        }
    }
    return j;
}

// Joint from CSV rows x1,x2,t,p (integer symbols, real probability).
inline DiscreteJoint read_joint_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open joint file: " + path.string());
    struct Row { std::size_t a, b, t; double p; };
    std::vector<Row> rows;
    std::size_t n1 = 0, n2 = 0, nt = 0;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        auto cells = detail::split_csv_line(line);
        if (cells.size() != 4)
            throw IoError("joint file " + path.string() + ": line " + std::to_string(lineno) +
                          " needs 4 columns x1,x2,t,p");
        if (lineno == 1 && (cells[0] == "x1" || cells[0] == "X1")) continue;  // optional header
        Row r;
        try {
            r.a = static_cast<std::size_t>(std::stoul(cells[0]));
            r.b = static_cast<std::size_t>(std::stoul(cells[1]));
            r.t = static_cast<std::size_t>(std::stoul(cells[2]));
            r.p = std::stod(cells[3]);
        } catch (const std::exception&) {
            throw IoError("joint file " + path.string() + ": bad line " + std::to_string(lineno));
        }
        n1 = std::max(n1, r.a + 1);
        n2 = std::max(n2, r.b + 1);
        nt = std::max(nt, r.t + 1);
        rows.push_back(r);
    }
    DiscreteJoint j(n1, n2, nt);
    for (const auto& r : rows) j.at(r.a, r.b, r.t) += r.p;
    j.validate();
    return j;
}

}  // namespace imix

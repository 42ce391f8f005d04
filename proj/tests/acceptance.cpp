// Acceptance suite: one self-contained check per numbered criterion, each
// printing a single PASS/FAIL line. Exit status is the number of failures.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "imix/checkpoint.hpp"
#include "imix/gradcheck.hpp"
#include "imix/interaction.hpp"
#include "imix/interpret.hpp"
#include "imix/pid.hpp"
#include "imix/trainer.hpp"

using namespace imix;
using Clock = std::chrono::steady_clock;

namespace {

int g_failures = 0;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

void report(int criterion, bool pass, const std::string& detail, double elapsed_s) {
    std::printf("criterion %2d %s %s [%.1fs]\n", criterion, pass ? "PASS" : "FAIL",
                detail.c_str(), elapsed_s);
    std::fflush(stdout);
    if (!pass) ++g_failures;
}

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof(buf), pattern, a, b, c);
    return buf;
}

// ---------------------------------------------------------------------------
// Training recipe used by the behavioral criteria. The data protocols are
// fixed by the criteria; these hyperparameters are the repository's
// recommended specialization recipe (see README).
TrainConfig recipe(std::uint64_t seed) {
    TrainConfig tc;
    tc.seed = seed;
    tc.lambda_int = 10.0;
    tc.temperature_rw = 3.0;
    tc.lr = 0.005;
    tc.hidden_dim = 8;
    tc.num_layer_rw = 1;
    tc.num_layers_fus = 1;
    tc.triplet_on_normalized = true;
    tc.mask_strategy = MaskStrategy::Mean;
    tc.train_epochs = 30;
    return tc;
}

MultimodalDataset mixture_data(std::uint64_t seed) {
    GenSpec gs;
    gs.kind = GenKind::Mixture;
    gs.n_samples = 4000;
    gs.seed = seed;
    gs.proportions = {0.25, 0.25, 0.25, 0.25};
    return generate(gs);
}

// ---------------------------------------------------------------------------
// 1. Gradient correctness on random graphs.
void criterion_1() {
    const auto t0 = Clock::now();
    const double max_err = check_gradients(20, /*seed=*/7);
    const double dt = seconds_since(t0);
    report(1, max_err < 1e-4 && dt < 10.0,
           fmt("gradient check over 20 random graphs: max rel err %.2e (< 1e-4)", max_err), dt);
}

// 2. Weighted-ensemble prediction matches an independent weighted sum.
void criterion_2() {
    const auto t0 = Clock::now();
    Rng rng(11, 1);
    double worst = 0.0;
    for (int rep = 0; rep < 1000; ++rep) {
        const std::size_t B = 1 + rng.next_u64() % 5;
        const std::size_t E = 2 + rng.next_u64() % 4;
        const std::size_t C = 1 + rng.next_u64() % 4;
        Tape t;
        Tensor w(B, E, 0.0);
        for (double& v : w.data()) v = rng.uniform(-2.0, 2.0);
        std::vector<NodeId> logits;
        std::vector<Tensor> raw;
        for (std::size_t e = 0; e < E; ++e) {
            Tensor l(B, C, 0.0);
            for (double& v : l.data()) v = rng.uniform(-3.0, 3.0);
            logits.push_back(t.leaf(l));
            raw.push_back(std::move(l));
        }
        const NodeId combined = MoeModel::combined_prediction(t, t.leaf(w), logits);
        const Tensor& got = t.val(combined);
        for (std::size_t b = 0; b < B; ++b)
            for (std::size_t c = 0; c < C; ++c) {
                double want = 0.0;
                for (std::size_t e = 0; e < E; ++e) want += w.at(b, e) * raw[e].at(b, c);
                worst = std::max(worst, std::abs(want - got.at(b, c)));
            }
    }
    report(2, worst < 1e-12,
           fmt("combined prediction vs independent weighted sum, 1000 draws: max |diff| %.2e", worst),
           seconds_since(t0));
}

// 3. Architecture invariants: expert count, pass counts, inference masking.
void criterion_3() {
    const auto t0 = Clock::now();
    bool ok = true;
    std::string why;
    for (std::size_t n = 2; n <= 4 && ok; ++n) {
        ModelConfig mc;
        mc.input_dims.assign(n, 3);
        mc.hidden_dim = 4;
        auto model = MoeModel::create(mc, 0);
        if (model.n_experts() != n + 2) {
            ok = false;
            why = fmt("expected %g experts, got %g", double(n + 2), double(model.n_experts()));
            break;
        }
        Rng data(5, n);
        std::vector<Tensor> inputs;
        for (std::size_t m = 0; m < n; ++m) {
            Tensor x(3, 3, 0.0);
            for (double& v : x.data()) v = data.normal();
            inputs.push_back(std::move(x));
        }
        {
            Tape t;
            ParamBinding p(t, model.params(), false);
            Rng mask(5, 99);
            PassCounter probe;
            auto bundle = forward_multiple(t, model, p, model.encode(t, p, inputs),
                                           MaskStrategy::Zero, mask, &probe);
            if (bundle.n_experts() != n + 2) ok = false;
            for (const auto& row : bundle.logits) {
                std::size_t outputs = 0;
                for (NodeId id : row) outputs += id >= 0 ? 1 : 0;
                if (outputs != 1 + n) {
                    ok = false;
                    why = fmt("training forward gave %g outputs per expert, want %g",
                              double(outputs), double(1 + n));
                }
            }
            if (probe.masked != static_cast<int>(n)) ok = false;
        }
        {
            Tape t;
            ParamBinding p(t, model.params(), false);
            PassCounter probe;
            model.predict(t, p, inputs, &probe);
            if (probe.masked != 0 || probe.clean != 1) {
                ok = false;
                why = "inference executed masked passes";
            }
        }
    }
    report(3, ok, "n+2 experts, 1+n outputs per expert in training, zero masked inference passes" +
                      (why.empty() ? "" : " (" + why + ")"),
           seconds_since(t0));
}

// ---------------------------------------------------------------------------
// Independent information-decomposition oracle (enumeration-based, written
// against the published definitions rather than the library internals).
double oracle_mi(const DiscreteJoint& j, int which) {  // 0: X1, 1: X2, 2: joint
    auto marg_t = [&](std::size_t t) {
        double s = 0.0;
        for (std::size_t a = 0; a < j.n1; ++a)
            for (std::size_t b = 0; b < j.n2; ++b) s += j.at(a, b, t);
        return s;
    };
    double mi = 0.0;
    if (which == 2) {
        for (std::size_t a = 0; a < j.n1; ++a)
            for (std::size_t b = 0; b < j.n2; ++b) {
                double pab = 0.0;
                for (std::size_t t = 0; t < j.nt; ++t) pab += j.at(a, b, t);
                for (std::size_t t = 0; t < j.nt; ++t) {
                    const double p = j.at(a, b, t);
                    if (p > 0.0) mi += p * std::log2(p / (pab * marg_t(t)));
                }
            }
        return mi;
    }
    const std::size_t ns = which == 0 ? j.n1 : j.n2;
    for (std::size_t s = 0; s < ns; ++s) {
        double ps = 0.0;
        std::vector<double> pst(j.nt, 0.0);
        for (std::size_t a = 0; a < j.n1; ++a)
            for (std::size_t b = 0; b < j.n2; ++b)
                for (std::size_t t = 0; t < j.nt; ++t)
                    if ((which == 0 ? a : b) == s) {
                        ps += j.at(a, b, t);
                        pst[t] += j.at(a, b, t);
                    }
        for (std::size_t t = 0; t < j.nt; ++t)
            if (pst[t] > 0.0) mi += pst[t] * std::log2(pst[t] / (ps * marg_t(t)));
    }
    return mi;
}

double oracle_redundancy(const DiscreteJoint& j) {
    // Minimum of the two sources' specific information, expectation over targets.
    double red = 0.0;
    for (std::size_t t = 0; t < j.nt; ++t) {
        double pt = 0.0;
        for (std::size_t a = 0; a < j.n1; ++a)
            for (std::size_t b = 0; b < j.n2; ++b) pt += j.at(a, b, t);
        if (pt <= 0.0) continue;
        double spec[2] = {0.0, 0.0};
        for (int src = 0; src < 2; ++src) {
            const std::size_t ns = src == 0 ? j.n1 : j.n2;
            for (std::size_t s = 0; s < ns; ++s) {
                double ps = 0.0, pst = 0.0;
                for (std::size_t a = 0; a < j.n1; ++a)
                    for (std::size_t b = 0; b < j.n2; ++b)
                        for (std::size_t tt = 0; tt < j.nt; ++tt)
                            if ((src == 0 ? a : b) == s) {
                                ps += j.at(a, b, tt);
                                if (tt == t) pst += j.at(a, b, tt);
                            }
                if (pst > 0.0) spec[src] += (pst / pt) * std::log2((pst / ps) / pt);
            }
        }
        red += pt * std::min(spec[0], spec[1]);
    }
    return red;
}

// 4. Information-decomposition fixtures and conservation.
void criterion_4() {
    const auto t0 = Clock::now();
    bool ok = true;
    std::string why;

    auto expect = [&](GenKind kind, int unique_k, double red, double u1, double u2, double syn,
                      const char* name) {
        GenSpec gs;
        gs.kind = kind;
        gs.unique_k = unique_k;
        const PidResult r = pid_decompose(analytic_joint(gs));
        const double err = std::max({std::abs(r.red - red), std::abs(r.unq1 - u1),
                                     std::abs(r.unq2 - u2), std::abs(r.syn - syn)});
        if (err > 1e-9) {
            ok = false;
            why = std::string(name) + fmt(" fixture off by %.2e", err);
        }
    };
    expect(GenKind::SynergyXor, 1, 0, 0, 0, 1, "xor");
    expect(GenKind::Redundant, 1, 1, 0, 0, 0, "copy");
    expect(GenKind::Unique, 1, 0, 1, 0, 0, "unq1");

    // AND gate against the enumeration oracle.
    {
        DiscreteJoint j(2, 2, 2);
        for (std::size_t a = 0; a < 2; ++a)
            for (std::size_t b = 0; b < 2; ++b) j.at(a, b, a & b) = 0.25;
        const PidResult r = pid_decompose(j);
        const double red = oracle_redundancy(j);
        const double u1 = oracle_mi(j, 0) - red;
        const double u2 = oracle_mi(j, 1) - red;
        const double syn = oracle_mi(j, 2) - red - u1 - u2;
        const double err = std::max({std::abs(r.red - red), std::abs(r.unq1 - u1),
                                     std::abs(r.unq2 - u2), std::abs(r.syn - syn)});
        if (err > 1e-6) {
            ok = false;
            why = fmt("and-gate components off by %.2e", err);
        }
    }

    // Conservation: components sum to the joint mutual information.
    Rng rng(23, 1);
    double worst = 0.0;
    for (int rep = 0; rep < 100; ++rep) {
        DiscreteJoint j(2, 2, 2);
        double total = 0.0;
        for (double& v : j.p) total += (v = rng.uniform());
        for (double& v : j.p) v /= total;
        const PidResult r = pid_decompose(j);
        worst = std::max(worst, std::abs(r.red + r.unq1 + r.unq2 + r.syn - oracle_mi(j, 2)));
        worst = std::max(worst, std::abs(r.total_mi - oracle_mi(j, 2)));
    }
    if (worst > 1e-9) {
        ok = false;
        why = fmt("conservation violated by %.2e on random joints", worst);
    }

    report(4, ok, "decomposition fixtures, and-gate oracle, conservation on 100 random joints" +
                      (why.empty() ? "" : " (" + why + ")"),
           seconds_since(t0));
}

// 5. Dominant-component classification of the noiseless generators.
void criterion_5() {
    const auto t0 = Clock::now();
    int hits = 0;
    struct Case { GenKind kind; int k; ExpertId want; };
    const Case cases[] = {
        {GenKind::Unique, 1, ExpertId::uniqueness(1)},
        {GenKind::SynergyXor, 1, ExpertId::synergy()},
        {GenKind::Redundant, 1, ExpertId::redundancy()},
    };
    for (const Case& c : cases) {
        GenSpec gs;
        gs.kind = c.kind;
        gs.unique_k = c.k;
        if (classify_dominant(analytic_joint(gs)) == c.want) ++hits;
    }
    report(5, hits == 3, fmt("dominant component named for %g/3 generators", double(hits)),
           seconds_since(t0));
}

// 6. Expert specialization on single-interaction datasets.
void criterion_6() {
    const auto t0 = Clock::now();
    bool ok = true;
    std::string detail;
    struct Case { GenKind kind; std::size_t want; const char* name; };
    const Case cases[] = {
        {GenKind::Unique, 0, "unique"},
        {GenKind::SynergyXor, 2, "synergy-xor"},
        {GenKind::Redundant, 3, "redundant"},
    };
    for (const Case& c : cases) {
        const auto ds_t0 = Clock::now();
        std::vector<double> mean_w(4, 0.0);
        for (std::uint64_t seed : {0ull, 1ull, 2ull}) {
            GenSpec gs;
            gs.kind = c.kind;
            gs.n_samples = 2000;
            gs.noise_sigma = 0.2;
            gs.seed = seed;
            const auto ds = generate(gs);
            const TrainResult res = train_run(recipe(seed), ds);
            const EvalOutput ev = evaluate(res.model, ds, res.split.test);
            for (std::size_t e = 0; e < 4; ++e) {
                double s = 0.0;
                for (std::size_t b = 0; b < ev.weights.rows(); ++b) s += ev.weights.at(b, e);
                mean_w[e] += s / static_cast<double>(ev.weights.rows()) / 3.0;
            }
        }
        std::size_t arg = 0;
        bool strict = true;
        for (std::size_t e = 1; e < 4; ++e)
            if (mean_w[e] > mean_w[arg]) arg = e;
        for (std::size_t e = 0; e < 4; ++e)
            if (e != arg && mean_w[e] >= mean_w[arg]) strict = false;
        const double dt = seconds_since(ds_t0);
        const bool hit = arg == c.want && strict && dt < 180.0;
        if (!hit) ok = false;
        detail += std::string(c.name) + fmt(":w[%g]=%.3f ", double(arg), mean_w[arg]);
        if (!hit) detail += "(miss) ";
    }
    report(6, ok, "intended expert has largest mean test weight on each dataset: " + detail,
           seconds_since(t0));
}

// Shared mixture-dataset runs for criteria 7-9.
struct MixtureStudy {
    double full = 0.0;                    // mean-masking full model
    double full_random = 0.0, full_zero = 0.0;
    double no_interaction = 0.0, synergy_redundancy = 0.0;
    double simple_weight = 0.0, less_forward = 0.0, latent_contrastive = 0.0;
    std::vector<double> expert_acc = std::vector<double>(4, 0.0);  // full model experts
    bool all_completed = true;
};

MixtureStudy run_mixture_study() {
    MixtureStudy s;
    auto arm = [&](AblationVariant v, MaskStrategy m, double* expert_out) {
        double acc = 0.0;
        for (std::uint64_t seed : {0ull, 1ull, 2ull}) {
            const auto ds = mixture_data(seed);
            TrainConfig tc = recipe(seed);
            tc.train_epochs = 40;
            tc.ablation = v;
            tc.mask_strategy = m;
            const TrainResult res = train_run(tc, ds);
            if (res.diverged) s.all_completed = false;
            const auto scores = expert_accuracy_comparison(res.model, ds, res.split.test);
            acc += scores.back().metrics.accuracy / 3.0;
            if (expert_out)
                for (std::size_t e = 0; e + 1 < scores.size(); ++e)
                    expert_out[e] += scores[e].metrics.accuracy / 3.0;
        }
        return acc;
    };
    s.full = arm(AblationVariant::None, MaskStrategy::Mean, s.expert_acc.data());
    s.full_random = arm(AblationVariant::None, MaskStrategy::Random, nullptr);
    s.full_zero = arm(AblationVariant::None, MaskStrategy::Zero, nullptr);
    s.no_interaction = arm(AblationVariant::NoInteraction, MaskStrategy::Mean, nullptr);
    s.synergy_redundancy = arm(AblationVariant::SynergyRedundancy, MaskStrategy::Mean, nullptr);
    s.simple_weight = arm(AblationVariant::SimpleWeight, MaskStrategy::Mean, nullptr);
    s.less_forward = arm(AblationVariant::LessForward, MaskStrategy::Mean, nullptr);
    s.latent_contrastive = arm(AblationVariant::LatentContrastive, MaskStrategy::Mean, nullptr);
    return s;
}

void criterion_7(const MixtureStudy& s, double elapsed) {
    double best_expert = 0.0;
    for (double a : s.expert_acc) best_expert = std::max(best_expert, a);
    report(7, s.full >= best_expert,
           fmt("mixture ensemble %.3f >= best individual expert %.3f", s.full, best_expert),
           elapsed);
}

void criterion_8(const MixtureStudy& s, double elapsed) {
    const bool ok = s.all_completed && s.full > s.no_interaction && s.full > s.synergy_redundancy;
    report(8, ok,
           fmt("full %.3f > no-interaction %.3f and > synergy-redundancy %.3f; all variants "
               "completed",
               s.full, s.no_interaction, s.synergy_redundancy) +
               fmt(" (deltas: simple-weight %+.3f, less-forward %+.3f, latent-contrastive %+.3f)",
                   s.simple_weight - s.full, s.less_forward - s.full,
                   s.latent_contrastive - s.full),
           elapsed);
}

void criterion_9(const MixtureStudy& s, double elapsed) {
    const double best = std::max({s.full_random, s.full, s.full_zero});
    report(9, s.full_random >= best - 0.01,
           fmt("random masking %.3f within 1 point of best strategy %.3f (mean %.3f)",
               s.full_random, best, s.full),
           elapsed);
}

// 10. Determinism of training.
void criterion_10() {
    const auto t0 = Clock::now();
    GenSpec gs;
    gs.kind = GenKind::Redundant;
    gs.n_samples = 300;
    const auto ds = generate(gs);
    TrainConfig tc;
    tc.train_epochs = 5;
    tc.hidden_dim = 8;
    tc.hidden_dim_rw = 8;
    const TrainResult a = train_run(tc, ds);
    const TrainResult b = train_run(tc, ds);
    bool ok = a.log.size() == b.log.size();
    if (ok)
        for (std::size_t e = 0; e < a.log.size(); ++e)
            ok = ok && a.log[e].task_loss == b.log[e].task_loss &&
                 a.log[e].int_losses == b.log[e].int_losses && a.log[e].val_acc == b.log[e].val_acc;
    ok = ok && checkpoint_json(a.model).dump() == checkpoint_json(b.model).dump();
    report(10, ok, "two identical runs: bit-identical epoch logs and checkpoints",
           seconds_since(t0));
}

// 11. Report integrity and parameter-count overhead.
void criterion_11() {
    const auto t0 = Clock::now();
    GenSpec gs;
    gs.kind = GenKind::Redundant;
    gs.n_samples = 300;
    const auto ds = generate(gs);
    TrainConfig tc;
    tc.train_epochs = 5;
    tc.hidden_dim = 8;
    tc.hidden_dim_rw = 8;
    const TrainResult res = train_run(tc, ds);

    const AgreementTable at = agreement_analysis(res.model, ds, res.split.test);
    bool ok = std::abs(at.sum() - 100.0) <= 0.01;

    double worst = 0.0;
    for (const auto& r : local_report(res.model, ds, res.split.test))
        for (std::size_t c = 0; c < r.final_logits.size(); ++c) {
            double s = 0.0;
            for (std::size_t e = 0; e < r.weights.size(); ++e) s += r.contributions[e][c];
            worst = std::max(worst, std::abs(s - r.final_logits[c]));
        }
    ok = ok && worst < 1e-9;

    const OverheadReport rep = measure_overhead(tc, ds, 3);
    const double ratio = static_cast<double>(rep.full.expert_param_count) /
                         static_cast<double>(rep.vanilla.expert_param_count);
    const auto probe = MoeModel::create(tc.model_config(ds), 0);
    const double tol = static_cast<double>(probe.reweighter_parameter_count()) /
                       static_cast<double>(rep.vanilla.expert_param_count);
    ok = ok && std::abs(ratio - 4.0) <= tol;

    report(11, ok,
           fmt("agreement sums to 100, contributions reconstruct logits (max |diff| %.1e), "
               "expert parameter ratio %.2f vs n+2=4",
               worst, ratio),
           seconds_since(t0));
}

}  // namespace

int main() {
    const auto suite_t0 = Clock::now();
    criterion_1();
    criterion_2();
    criterion_3();
    criterion_4();
    criterion_5();
    criterion_6();
    {
        const auto t0 = Clock::now();
        const MixtureStudy s = run_mixture_study();
        const double per = seconds_since(t0) / 3.0;
        criterion_7(s, per);
        criterion_8(s, per);
        criterion_9(s, per);
    }
    criterion_10();
    criterion_11();
    const double total = seconds_since(suite_t0);
    report(12, total < 900.0, fmt("suite wall-clock %.1fs (< 900s)", total), total);
    if (g_failures > 0) std::printf("%d criterion(s) failed\n", g_failures);
    return g_failures;
}

// Command-line surface: dataset generation, training, evaluation,
// interpretation reports, information decomposition and benchmarks.

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "imix/checkpoint.hpp"
#include "imix/dataset.hpp"
#include "imix/interpret.hpp"
#include "imix/pid.hpp"
#include "imix/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace imix;

namespace {

std::string timestamp_utc() {
    const std::time_t now = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
    return buf;
}

// Output-root override: relative --out paths land under $IMIX_OUT_ROOT.
fs::path resolve_out(const std::string& out) {
    fs::path p(out);
    if (p.is_relative()) {
        if (const char* root = std::getenv("IMIX_OUT_ROOT")) return fs::path(root) / p;
    }
    return p;
}

std::vector<std::size_t> parse_dims(const std::string& s) {
    std::vector<std::size_t> dims;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) dims.push_back(std::stoul(tok));
    return dims;
}

std::vector<double> parse_doubles(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stod(tok));
    return out;
}

std::vector<std::uint64_t> parse_seeds(const std::string& s) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ',')) out.push_back(std::stoull(tok));
    if (out.empty()) throw ConfigError("--seeds: need at least one seed");
    return out;
}

json metrics_json(const Metrics& m, TaskKind task) {
    json j;
    if (task == TaskKind::Regression) {
        j["mse"] = m.mse;
    } else {
        j["accuracy"] = m.accuracy;
        j["auroc"] = m.auroc;
        j["micro_f1"] = m.micro_f1;
        j["macro_f1"] = m.macro_f1;
    }
    return j;
}

json train_config_json(const TrainConfig& c) {
    json j;
    j["lr"] = c.lr;
    j["train_epochs"] = c.train_epochs;
    j["batch_size"] = c.batch_size;
    j["interaction_loss_weight"] = c.lambda_int;
    j["temperature_rw"] = c.temperature_rw;
    j["hidden_dim_rw"] = c.hidden_dim_rw;
    j["num_layer_rw"] = c.num_layer_rw;
    j["hidden_dim"] = c.hidden_dim;
    j["num_layers_enc"] = c.num_layers_enc;
    j["num_layers_fus"] = c.num_layers_fus;
    j["num_layers_pred"] = c.num_layers_pred;
    j["num_heads"] = c.num_heads;
    j["fusion"] = c.fusion == FusionKind::Attention ? "attention" : "mlp";
    j["mask_strategy"] = to_string(c.mask_strategy);
    j["triplet_margin"] = c.triplet_margin;
    j["synergy_mse_margin"] = c.synergy_mse_margin;
    j["triplet_on_normalized"] = c.triplet_on_normalized;
    j["seed"] = c.seed;
    j["ablation"] = to_string(c.ablation);
    return j;
}

void write_manifest(const fs::path& dir, const std::string& command, const json& config,
                    const std::vector<std::uint64_t>& seeds, const json& paths) {
    json j;
    j["artifact_version"] = 1;
    j["command"] = command;
    j["config"] = config;
    j["seeds"] = seeds;
    j["paths"] = paths;
    j["started_at"] = timestamp_utc();
    fs::create_directories(dir);
    std::ofstream out(dir / "run_manifest.json");
    if (!out) throw IoError("cannot write run manifest in " + dir.string());
    out << j.dump(2) << "\n";
}

void write_epoch_log(const TrainResult& res, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path.string());
    out << "epoch,task_loss";
    for (const auto& e : res.model.experts()) out << ",int_loss_" << e.id.label();
    out << ",train_acc,val_acc,seconds\n";
    for (const auto& el : res.log) {
        out << el.epoch << "," << detail::fmt17(el.task_loss);
        for (double v : el.int_losses) out << "," << detail::fmt17(v);
        out << "," << detail::fmt17(el.train_acc) << "," << detail::fmt17(el.val_acc) << ","
            << detail::fmt17(el.seconds) << "\n";
    }
}

// One training run with all artifacts in `dir`.
TrainResult run_and_save(const TrainConfig& cfg, const MultimodalDataset& ds, const fs::path& dir) {
    fs::create_directories(dir);
    TrainResult res = train_run(cfg, ds);
    save_checkpoint(res.model, dir / "checkpoint.json");
    write_epoch_log(res, dir / "epochs.csv");
    json m;
    m["val"] = metrics_json(res.val_metrics, ds.task);
    m["test"] = metrics_json(res.test_metrics, ds.task);
    m["best_epoch"] = res.best_epoch;
    m["best_val"] = res.best_val;
    m["diverged"] = res.diverged;
    std::ofstream out(dir / "metrics.json");
    out << m.dump(2) << "\n";
    return res;
}

double headline_metric(const Metrics& m, TaskKind task) {
    return task == TaskKind::Regression ? m.mse : m.accuracy;
}

struct TrainFlags {
    TrainConfig cfg;
    std::string data, out;
    std::string fusion = "mlp", mask = "random", ablation = "none", baseline = "none";
    std::string seeds = "0";
    std::string config_path;
    CLI::App* cmd = nullptr;
};

void add_train_flags(CLI::App* cmd, TrainFlags& f) {
    cmd->add_option("--data", f.data, "dataset directory")->required();
    cmd->add_option("--out", f.out, "output directory")->required();
    cmd->add_option("--lr", f.cfg.lr, "learning rate");
    cmd->add_option("--train_epochs", f.cfg.train_epochs, "number of epochs");
    cmd->add_option("--batch_size", f.cfg.batch_size, "minibatch size");
    cmd->add_option("--interaction_loss_weight", f.cfg.lambda_int,
                    "weight of the interaction losses");
    cmd->add_option("--temperature_rw", f.cfg.temperature_rw, "reweighting softmax temperature");
    cmd->add_option("--hidden_dim_rw", f.cfg.hidden_dim_rw, "reweighting model hidden width");
    cmd->add_option("--num_layer_rw", f.cfg.num_layer_rw, "reweighting model depth");
    cmd->add_option("--hidden_dim", f.cfg.hidden_dim, "embedding / fusion hidden width");
    cmd->add_option("--num_layers_enc", f.cfg.num_layers_enc, "encoder depth");
    cmd->add_option("--num_layers_fus", f.cfg.num_layers_fus, "fusion body depth");
    cmd->add_option("--num_layers_pred", f.cfg.num_layers_pred, "prediction head depth");
    cmd->add_option("--num_heads", f.cfg.num_heads, "attention heads (attention fusion)");
    cmd->add_option("--fusion", f.fusion, "fusion body: mlp | attention");
    cmd->add_option("--mask_strategy", f.mask, "masking: random | mean | zero");
    cmd->add_option("--triplet_margin", f.cfg.triplet_margin, "uniqueness triplet margin");
    cmd->add_option("--synergy_mse_margin", f.cfg.synergy_mse_margin,
                    "regression synergy hinge margin");
    cmd->add_flag("--triplet_on_normalized", f.cfg.triplet_on_normalized,
                  "triplet distances on l2-normalized outputs");
    cmd->add_option("--seeds", f.seeds, "comma-separated seeds; several = aggregated runs");
    cmd->add_option("--ablation", f.ablation,
                    "none | no-interaction | latent-contrastive | simple-weight | less-forward | "
                    "synergy-redundancy");
    cmd->add_option("--baseline", f.baseline, "none | early-fusion | late-fusion");
    cmd->add_option("--config", f.config_path, "config file (key = value, '#' comments)");
    f.cmd = cmd;
}

// Merges a key = value config file into the flags. Command-line flags win;
// unknown keys are rejected.
void apply_config_file(TrainFlags& f) {
    if (f.config_path.empty()) return;
    std::ifstream in(f.config_path);
    if (!in) throw IoError("config: cannot open " + f.config_path);
    auto trim = [](std::string s) {
        const auto a = s.find_first_not_of(" \t\r");
        const auto b = s.find_last_not_of(" \t\r");
        return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config: line " + std::to_string(lineno) + " is not key = value");
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));

        const CLI::Option* opt;
        try {
            opt = f.cmd->get_option("--" + key);
        } catch (const CLI::OptionNotFound&) {
            throw ConfigError("config: unknown key '" + key + "'");
        }
        if (opt->count() > 0) continue;  // explicit flag wins

        auto num = [&](double lo) {
            const double v = std::stod(val);
            if (v < lo) throw ConfigError("config: " + key + " out of range");
            return v;
        };
        auto flag = [&] { return val == "1" || val == "true" || val == "on"; };
        if (key == "lr") f.cfg.lr = num(0.0);
        else if (key == "train_epochs") f.cfg.train_epochs = static_cast<std::size_t>(num(0));
        else if (key == "batch_size") f.cfg.batch_size = static_cast<std::size_t>(num(0));
        else if (key == "interaction_loss_weight") f.cfg.lambda_int = num(0.0);
        else if (key == "temperature_rw") f.cfg.temperature_rw = num(0.0);
        else if (key == "hidden_dim_rw") f.cfg.hidden_dim_rw = static_cast<std::size_t>(num(0));
        else if (key == "num_layer_rw") f.cfg.num_layer_rw = static_cast<std::size_t>(num(0));
        else if (key == "hidden_dim") f.cfg.hidden_dim = static_cast<std::size_t>(num(0));
        else if (key == "num_layers_enc") f.cfg.num_layers_enc = static_cast<std::size_t>(num(0));
        else if (key == "num_layers_fus") f.cfg.num_layers_fus = static_cast<std::size_t>(num(0));
        else if (key == "num_layers_pred") f.cfg.num_layers_pred = static_cast<std::size_t>(num(0));
        else if (key == "num_heads") f.cfg.num_heads = static_cast<std::size_t>(num(0));
        else if (key == "triplet_margin") f.cfg.triplet_margin = num(0.0);
        else if (key == "synergy_mse_margin") f.cfg.synergy_mse_margin = num(0.0);
        else if (key == "triplet_on_normalized") f.cfg.triplet_on_normalized = flag();
        else if (key == "fusion") f.fusion = val;
        else if (key == "mask_strategy") f.mask = val;
        else if (key == "ablation") f.ablation = val;
        else if (key == "baseline") f.baseline = val;
        else if (key == "seeds") f.seeds = val;
        else if (key == "data") f.data = val;
        else if (key == "out") f.out = val;
        else throw ConfigError("config: key '" + key + "' cannot be set from a file");
    }
}

void finish_train_flags(TrainFlags& f) {
    apply_config_file(f);
    f.cfg.fusion = fusion_kind_from_string(f.fusion);
    f.cfg.mask_strategy = mask_strategy_from_string(f.mask);
    f.cfg.ablation = ablation_from_string(f.ablation);
    f.cfg.baseline = baseline_from_string(f.baseline);
}

int cmd_train(TrainFlags& f) {
    finish_train_flags(f);
    const auto seeds = parse_seeds(f.seeds);
    const fs::path out = resolve_out(f.out);
    const MultimodalDataset ds = read_dataset(f.data);
    write_manifest(out, "train", train_config_json(f.cfg), seeds,
                   {{"data", f.data}, {"out", out.string()}});

    if (f.cfg.baseline != BaselineKind::None) {
        std::vector<double> vals;
        json runs = json::array();
        for (auto seed : seeds) {
            TrainConfig c = f.cfg;
            c.seed = seed;
            const BaselineResult r = train_baseline(c, ds);
            vals.push_back(headline_metric(r.test_metrics, ds.task));
            runs.push_back({{"seed", seed},
                            {"test", metrics_json(r.test_metrics, ds.task)},
                            {"param_count", r.param_count}});
        }
        const SeedStats st = seed_stats(vals);
        json summary = {{"baseline", f.baseline}, {"runs", runs},
                        {"mean", st.mean}, {"std", st.stddev}};
        std::ofstream o(out / "summary.json");
        o << summary.dump(2) << "\n";
        std::cout << f.baseline << ": " << st.mean << " +/- " << st.stddev << "\n";
        return 0;
    }

    std::vector<double> vals;
    json runs = json::array();
    for (auto seed : seeds) {
        TrainConfig c = f.cfg;
        c.seed = seed;
        const fs::path dir = seeds.size() == 1 ? out : out / ("seed" + std::to_string(seed));
        const TrainResult r = run_and_save(c, ds, dir);
        vals.push_back(headline_metric(r.test_metrics, ds.task));
        runs.push_back({{"seed", seed},
                        {"test", metrics_json(r.test_metrics, ds.task)},
                        {"val", metrics_json(r.val_metrics, ds.task)},
                        {"diverged", r.diverged}});
    }
    const SeedStats st = seed_stats(vals);
    json summary = {{"runs", runs}, {"mean", st.mean}, {"std", st.stddev}};
    std::ofstream o(out / "summary.json");
    o << summary.dump(2) << "\n";
    std::cout << "test " << (ds.task == TaskKind::Regression ? "mse" : "accuracy") << ": "
              << st.mean << " +/- " << st.stddev << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"interaction-aware mixture-of-experts laboratory"};
    app.require_subcommand(1);

    // ---- gen ----
    auto* gen = app.add_subcommand("gen", "generate a synthetic dataset");
    struct {
        std::string kind = "synergy-xor", dims = "8,8", proportions, out;
        std::size_t n = 2000;
        double sigma = 0.2;
        std::uint64_t seed = 0;
        int unique_k = 1;
        bool force = false;
    } g;
    gen->add_option("--kind", g.kind, "unique | redundant | synergy-xor | mixture");
    gen->add_option("--n", g.n, "number of samples");
    gen->add_option("--dims", g.dims, "per-modality feature dims, e.g. 8,8");
    gen->add_option("--sigma", g.sigma, "noise level on informative coordinates");
    gen->add_option("--seed", g.seed, "generator seed");
    gen->add_option("--unique-k", g.unique_k, "informative modality for kind=unique (1-based)");
    gen->add_option("--proportions", g.proportions,
                    "mixture proportions uni1..unin,syn,red (sum 1)");
    gen->add_option("--out", g.out, "output directory")->required();
    gen->add_flag("--force", g.force, "allow writing into a non-empty directory");

    // ---- train ----
    auto* train = app.add_subcommand("train", "train a model on a dataset directory");
    TrainFlags tf;
    add_train_flags(train, tf);

    // ---- eval ----
    auto* eval = app.add_subcommand("eval", "evaluate a checkpoint");
    struct {
        std::string checkpoint, data, split = "test", out;
        std::uint64_t seed = 0;
    } ev;
    eval->add_option("--checkpoint", ev.checkpoint, "checkpoint JSON")->required();
    eval->add_option("--data", ev.data, "dataset directory")->required();
    eval->add_option("--split", ev.split, "train | val | test | all");
    eval->add_option("--seed", ev.seed, "seed used for the train/val/test split");
    eval->add_option("--out", ev.out, "optional metrics JSON path");

    // ---- interpret ----
    auto* interp = app.add_subcommand("interpret", "interpretation reports from a checkpoint");
    struct {
        std::string checkpoint, data, out;
        std::string split = "test";
        std::uint64_t seed = 0;
    } ip;
    interp->add_option("--checkpoint", ip.checkpoint, "checkpoint JSON")->required();
    interp->add_option("--data", ip.data, "dataset directory")->required();
    interp->add_option("--split", ip.split, "train | val | test | all");
    interp->add_option("--seed", ip.seed, "seed used for the split");
    interp->add_option("--out", ip.out, "output directory")->required();

    // ---- pid ----
    auto* pid = app.add_subcommand("pid", "information decomposition of a discrete joint");
    struct {
        std::string joint, kind, out;
        int unique_k = 1;
        std::string proportions;
    } pd;
    pid->add_option("--joint", pd.joint, "CSV with rows x1,x2,t,p");
    pid->add_option("--kind", pd.kind, "analytic joint: unique | redundant | synergy-xor | mixture");
    pid->add_option("--unique-k", pd.unique_k, "informative modality for kind=unique");
    pid->add_option("--proportions", pd.proportions, "mixture proportions uni1,uni2,syn,red");
    pid->add_option("--out", pd.out, "optional JSON output path");

    // ---- ablate ----
    auto* ablate = app.add_subcommand("ablate", "run ablation variants against the full model");
    TrainFlags af;
    add_train_flags(ablate, af);
    std::string variants = "all";
    ablate->add_option("--variants", variants, "all | comma-separated variant names");

    // ---- bench ----
    auto* bench = app.add_subcommand("bench", "overhead and masking-strategy benchmarks");
    TrainFlags bf;
    add_train_flags(bench, bf);

    CLI11_PARSE(app, argc, argv);

    try {
        if (*gen) {
            GenSpec spec;
            spec.kind = g.kind == "unique" ? GenKind::Unique
                        : g.kind == "redundant" ? GenKind::Redundant
                        : g.kind == "synergy-xor" ? GenKind::SynergyXor
                        : g.kind == "mixture" ? GenKind::Mixture
                        : throw ConfigError("unknown --kind: " + g.kind);
            spec.n_samples = g.n;
            spec.dims = parse_dims(g.dims);
            spec.noise_sigma = g.sigma;
            spec.seed = g.seed;
            spec.unique_k = g.unique_k;
            if (!g.proportions.empty()) spec.proportions = parse_doubles(g.proportions);
            const fs::path out = resolve_out(g.out);
            if (fs::exists(out) && !fs::is_empty(out) && !g.force)
                throw IoError("output directory is not empty (use --force): " + out.string());
            const MultimodalDataset ds = generate(spec);
            write_dataset(ds, out);
            json cfg = {{"kind", g.kind}, {"n", g.n}, {"dims", g.dims}, {"sigma", g.sigma},
                        {"unique_k", g.unique_k}, {"proportions", g.proportions}};
            write_manifest(out, "gen", cfg, {g.seed}, {{"out", out.string()}});
            std::cout << "wrote " << ds.n_samples() << " samples to " << out.string() << "\n";
            return 0;
        }

        if (*train) return cmd_train(tf);

        if (*eval) {
            const MoeModel model = load_checkpoint(ev.checkpoint);
            const MultimodalDataset ds = read_dataset(ev.data);
            std::vector<std::size_t> rows;
            if (ev.split == "all") {
                rows.resize(ds.n_samples());
                for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
            } else {
                const Split sp = split_dataset(ds, ev.seed);
                rows = ev.split == "train" ? sp.train : ev.split == "val" ? sp.val : sp.test;
            }
            const EvalOutput out = evaluate(model, ds, rows);
            const json j = metrics_json(out.metrics, ds.task);
            if (!ev.out.empty()) {
                std::ofstream o(resolve_out(ev.out));
                o << j.dump(2) << "\n";
            }
            std::cout << j.dump(2) << "\n";
            return 0;
        }

        if (*interp) {
            const MoeModel model = load_checkpoint(ip.checkpoint);
            const MultimodalDataset ds = read_dataset(ip.data);
            std::vector<std::size_t> rows;
            if (ip.split == "all") {
                rows.resize(ds.n_samples());
                for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
            } else {
                const Split sp = split_dataset(ds, ip.seed);
                rows = ip.split == "train" ? sp.train : ip.split == "val" ? sp.val : sp.test;
            }
            const fs::path out = resolve_out(ip.out);
            fs::create_directories(out);
            const auto records = local_report(model, ds, rows);
            GlobalReport rep = global_report(records);
            name_report_experts(rep, model);
            write_local_jsonl(records, out / "local.jsonl");
            write_global_json(rep, out / "global.json");
            if (ds.task != TaskKind::Regression)
                write_agreement_json(agreement_analysis(model, ds, rows), out / "agreement.json");
            write_experts_csv(expert_accuracy_comparison(model, ds, rows), ds.task,
                              out / "experts.csv");
            write_manifest(out, "interpret", {{"split", ip.split}}, {ip.seed},
                           {{"checkpoint", ip.checkpoint}, {"data", ip.data}});
            std::cout << "wrote reports to " << out.string() << "\n";
            return 0;
        }

        if (*pid) {
            DiscreteJoint joint;
            if (!pd.joint.empty()) {
                joint = read_joint_csv(pd.joint);
            } else if (!pd.kind.empty()) {
                GenSpec spec;
                spec.kind = pd.kind == "unique" ? GenKind::Unique
                            : pd.kind == "redundant" ? GenKind::Redundant
                            : pd.kind == "synergy-xor" ? GenKind::SynergyXor
                            : pd.kind == "mixture" ? GenKind::Mixture
                            : throw ConfigError("unknown --kind: " + pd.kind);
                spec.unique_k = pd.unique_k;
                if (!pd.proportions.empty()) spec.proportions = parse_doubles(pd.proportions);
                joint = analytic_joint(spec);
            } else {
                throw ConfigError("pid: need --joint or --kind");
            }
            const PidResult r = pid_decompose(joint);
            json j = {{"redundancy", r.red}, {"unique_1", r.unq1}, {"unique_2", r.unq2},
                      {"synergy", r.syn}, {"total_mi", r.total_mi}};
            try {
                j["dominant"] = classify_dominant(joint).label();
            } catch (const ContractError&) {
                j["dominant"] = nullptr;
            }
            if (!pd.out.empty()) {
                std::ofstream o(resolve_out(pd.out));
                o << j.dump(2) << "\n";
            }
            std::cout << j.dump(2) << "\n";
            return 0;
        }

        if (*ablate) {
            finish_train_flags(af);
            const auto seeds = parse_seeds(af.seeds);
            const fs::path out = resolve_out(af.out);
            const MultimodalDataset ds = read_dataset(af.data);
            std::vector<AblationVariant> vs;
            if (variants == "all") {
                vs = {AblationVariant::None, AblationVariant::NoInteraction,
                      AblationVariant::LatentContrastive, AblationVariant::SimpleWeight,
                      AblationVariant::LessForward, AblationVariant::SynergyRedundancy};
            } else {
                std::stringstream ss(variants);
                std::string tok;
                vs.push_back(AblationVariant::None);
                while (std::getline(ss, tok, ',')) vs.push_back(ablation_from_string(tok));
            }
            write_manifest(out, "ablate", train_config_json(af.cfg), seeds,
                           {{"data", af.data}, {"out", out.string()}});
            json rows = json::array();
            double full_mean = 0.0;
            json summary;
            for (const auto v : vs) {
                std::vector<double> vals;
                for (auto seed : seeds) {
                    TrainConfig c = af.cfg;
                    c.seed = seed;
                    const TrainResult r = run_ablation(v, c, ds);
                    const double metric = headline_metric(r.test_metrics, ds.task);
                    vals.push_back(metric);
                    rows.push_back({{"variant", to_string(v)}, {"seed", seed},
                                    {"test", metrics_json(r.test_metrics, ds.task)}});
                }
                const SeedStats st = seed_stats(vals);
                if (v == AblationVariant::None) full_mean = st.mean;
                summary[to_string(v)] = {{"mean", st.mean}, {"std", st.stddev},
                                         {"delta_vs_full", st.mean - full_mean}};
            }
            json j = {{"rows", rows}, {"summary", summary}};
            fs::create_directories(out);
            std::ofstream o(out / "ablations.json");
            o << j.dump(2) << "\n";
            std::cout << summary.dump(2) << "\n";
            return 0;
        }

        if (*bench) {
            finish_train_flags(bf);
            const auto seeds = parse_seeds(bf.seeds);
            const fs::path out = resolve_out(bf.out);
            const MultimodalDataset ds = read_dataset(bf.data);
            write_manifest(out, "bench", train_config_json(bf.cfg), seeds,
                           {{"data", bf.data}, {"out", out.string()}});
            TrainConfig c = bf.cfg;
            c.seed = seeds[0];
            const OverheadReport rep = measure_overhead(c, ds);
            json jover;
            for (const OverheadRow* row : {&rep.vanilla, &rep.full})
                jover[row->label] = {{"train_s_per_epoch", row->train_s_per_epoch},
                                     {"inference_s", row->inference_s},
                                     {"param_count", row->param_count},
                                     {"expert_param_count", row->expert_param_count}};
            // Masking-strategy comparison with the paper's three choices.
            json jmask;
            for (const MaskStrategy s :
                 {MaskStrategy::Random, MaskStrategy::Mean, MaskStrategy::Zero}) {
                std::vector<double> vals;
                for (auto seed : seeds) {
                    TrainConfig mc = bf.cfg;
                    mc.seed = seed;
                    mc.mask_strategy = s;
                    vals.push_back(headline_metric(train_run(mc, ds).test_metrics, ds.task));
                }
                const SeedStats st = seed_stats(vals);
                jmask[to_string(s)] = {{"mean", st.mean}, {"std", st.stddev}};
            }
            json j = {{"overhead", jover}, {"masking", jmask}};
            fs::create_directories(out);
            std::ofstream o(out / "bench.json");
            o << j.dump(2) << "\n";
            std::cout << j.dump(2) << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

#ifndef IMIX_CLI_PATH
#error "IMIX_CLI_PATH must point at the built command-line binary"
#endif

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const fs::path kWork = fs::temp_directory_path() / "imix_cli_test";

int run(const std::string& args) {
    const std::string cmd =
        std::string("\"") + IMIX_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
    const int rc = std::system(cmd.c_str());
    return rc == -1 ? -1 : WEXITSTATUS(rc);
}

json read_json(const fs::path& p) {
    std::ifstream in(p);
    REQUIRE_MESSAGE(bool(in), "missing file: " << p.string());
    json j;
    in >> j;
    return j;
}

struct Workspace {
    Workspace() {
        fs::remove_all(kWork);
        fs::create_directories(kWork);
    }
};

const fs::path& data_dir() {
    static fs::path dir = [] {
        static Workspace ws;
        const fs::path d = kWork / "data";
        const int rc = run("gen --kind redundant --n 80 --dims 3,3 --sigma 0.1 --seed 1 --out " +
                           d.string());
        REQUIRE(rc == 0);
        return d;
    }();
    return dir;
}

const std::string kTinyTrain = " --train_epochs 2 --hidden_dim 6 --hidden_dim_rw 6 ";

}  // namespace

TEST_CASE("help succeeds and unknown flags are rejected") {
    CHECK(run("--help") == 0);
    CHECK(run("gen --help") == 0);
    CHECK(run("train --no-such-flag") != 0);
    CHECK(run("") != 0);  // a subcommand is required
}

TEST_CASE("gen writes a loadable dataset and refuses to clobber") {
    const fs::path d = data_dir();
    CHECK(fs::exists(d / "manifest.json"));
    CHECK(fs::exists(d / "m1.csv"));
    CHECK(fs::exists(d / "m2.csv"));
    CHECK(fs::exists(d / "labels.csv"));
    CHECK(fs::exists(d / "run_manifest.json"));
    const json man = read_json(d / "run_manifest.json");
    CHECK(man.at("command") == "gen");
    CHECK(man.at("artifact_version") == 1);

    // Non-empty output dir without --force fails, with --force succeeds.
    CHECK(run("gen --kind redundant --n 20 --dims 3,3 --out " + d.string()) != 0);
    CHECK(run("gen --kind redundant --n 20 --dims 3,3 --out " + d.string() + " --force") == 0);
    // Regenerate the standard fixture for later cases.
    CHECK(run("gen --kind redundant --n 80 --dims 3,3 --sigma 0.1 --seed 1 --out " +
              d.string() + " --force") == 0);
}

TEST_CASE("gen validates its arguments") {
    CHECK(run("gen --kind nope --out " + (kWork / "bad1").string()) != 0);
    CHECK(run("gen --kind unique --unique-k 7 --dims 3,3 --out " + (kWork / "bad2").string()) != 0);
    CHECK(run("gen --kind mixture --proportions 0.5,0.5 --dims 3,3 --out " +
              (kWork / "bad3").string()) != 0);
}

TEST_CASE("train writes the full artifact set") {
    const fs::path out = kWork / "run1";
    const int rc = run("train --data " + data_dir().string() + " --out " + out.string() +
                       kTinyTrain + "--seeds 0");
    REQUIRE(rc == 0);
    CHECK(fs::exists(out / "run_manifest.json"));
    CHECK(fs::exists(out / "checkpoint.json"));
    CHECK(fs::exists(out / "epochs.csv"));
    CHECK(fs::exists(out / "metrics.json"));
    CHECK(fs::exists(out / "summary.json"));
    const json man = read_json(out / "run_manifest.json");
    CHECK(man.at("command") == "train");
    CHECK(man.at("config").at("interaction_loss_weight").get<double>() > 0.0);
    const json metrics = read_json(out / "metrics.json");
    CHECK(metrics.contains("val"));
    CHECK(metrics.contains("test"));
    CHECK(metrics.at("diverged") == false);
    // Epoch log: header + one line per epoch.
    std::ifstream in(out / "epochs.csv");
    std::string line;
    std::size_t lines = 0;
    while (std::getline(in, line))
        if (!line.empty()) ++lines;
    CHECK(lines == 3);
}

TEST_CASE("multi-seed training fans out into per-seed directories") {
    const fs::path out = kWork / "run_multi";
    const int rc = run("train --data " + data_dir().string() + " --out " + out.string() +
                       kTinyTrain + "--seeds 0,1");
    REQUIRE(rc == 0);
    CHECK(fs::exists(out / "seed0" / "checkpoint.json"));
    CHECK(fs::exists(out / "seed1" / "checkpoint.json"));
    const json summary = read_json(out / "summary.json");
    CHECK(summary.at("runs").size() == 2);
    CHECK(summary.contains("mean"));
    CHECK(summary.contains("std"));
}

TEST_CASE("eval reads a checkpoint and reports metrics") {
    const fs::path ckpt = kWork / "run1" / "checkpoint.json";
    REQUIRE(fs::exists(ckpt));
    const fs::path mj = kWork / "eval_metrics.json";
    const int rc = run("eval --checkpoint " + ckpt.string() + " --data " + data_dir().string() +
                       " --split test --seed 0 --out " + mj.string());
    REQUIRE(rc == 0);
    const json j = read_json(mj);
    CHECK(j.at("accuracy").get<double>() >= 0.0);
    CHECK(j.at("accuracy").get<double>() <= 1.0);
    CHECK(j.contains("auroc"));
    // Missing checkpoint is a clean failure.
    CHECK(run("eval --checkpoint /no/such.json --data " + data_dir().string()) != 0);
}

TEST_CASE("interpret writes all four reports") {
    const fs::path ckpt = kWork / "run1" / "checkpoint.json";
    const fs::path out = kWork / "reports";
    const int rc = run("interpret --checkpoint " + ckpt.string() + " --data " +
                       data_dir().string() + " --split test --seed 0 --out " + out.string());
    REQUIRE(rc == 0);
    CHECK(fs::exists(out / "local.jsonl"));
    CHECK(fs::exists(out / "global.json"));
    CHECK(fs::exists(out / "agreement.json"));
    CHECK(fs::exists(out / "experts.csv"));
    CHECK(fs::exists(out / "run_manifest.json"));
    const json agreement = read_json(out / "agreement.json");
    const double total = agreement.at("agree_correct_pct").get<double>() +
                         agreement.at("agree_incorrect_pct").get<double>() +
                         agreement.at("disagree_correct_pct").get<double>() +
                         agreement.at("disagree_incorrect_pct").get<double>();
    CHECK(total > 99.99);
    CHECK(total < 100.01);
}

TEST_CASE("pid names the dominant component of an analytic joint") {
    const fs::path out = kWork / "pid.json";
    REQUIRE(run("pid --kind synergy-xor --out " + out.string()) == 0);
    const json j = read_json(out);
    CHECK(j.at("dominant") == "synergy");
    CHECK(j.at("synergy").get<double>() > 0.99);
    CHECK(j.at("redundancy").get<double>() < 0.01);

    // From a CSV joint.
    const fs::path joint = kWork / "joint.csv";
    {
        std::ofstream o(joint);
        o << "x1,x2,t,p\n0,0,0,0.5\n1,1,1,0.5\n";
    }
    const fs::path out2 = kWork / "pid2.json";
    REQUIRE(run("pid --joint " + joint.string() + " --out " + out2.string()) == 0);
    CHECK(read_json(out2).at("dominant") == "redundancy");
    CHECK(run("pid") != 0);  // needs --joint or --kind
}

TEST_CASE("config file values merge under flag precedence") {
    const fs::path cfgfile = kWork / "train.cfg";
    {
        std::ofstream o(cfgfile);
        o << "# tiny run\nlr = 0.001\ntrain_epochs = 2\nhidden_dim = 6\nhidden_dim_rw = 6\n";
    }
    const fs::path out = kWork / "run_cfg";
    const int rc = run("train --data " + data_dir().string() + " --out " + out.string() +
                       " --config " + cfgfile.string() + " --lr 0.002");
    REQUIRE(rc == 0);
    const json man = read_json(out / "run_manifest.json");
    CHECK(man.at("config").at("lr").get<double>() == 0.002);  // flag beats file
    CHECK(man.at("config").at("train_epochs").get<int>() == 2);
}

TEST_CASE("ablate emits per-variant deltas") {
    const fs::path out = kWork / "ablate";
    const int rc = run("ablate --data " + data_dir().string() + " --out " + out.string() +
                       kTinyTrain + "--variants no-interaction,simple-weight");
    REQUIRE(rc == 0);
    const json j = read_json(out / "ablations.json");
    CHECK(j.at("summary").contains("none"));
    CHECK(j.at("summary").contains("no-interaction"));
    CHECK(j.at("summary").contains("simple-weight"));
    CHECK(j.at("summary").at("none").at("delta_vs_full").get<double>() == 0.0);
    CHECK(run("ablate --data " + data_dir().string() + " --out " + out.string() +
              kTinyTrain + "--variants bogus") != 0);
}

TEST_CASE("bench reports overhead and the masking comparison") {
    const fs::path out = kWork / "bench";
    const int rc = run("bench --data " + data_dir().string() + " --out " + out.string() +
                       kTinyTrain + "--seeds 0");
    REQUIRE(rc == 0);
    const json j = read_json(out / "bench.json");
    CHECK(j.at("overhead").contains("vanilla-fusion"));
    CHECK(j.at("overhead").contains("full-model"));
    for (const char* s : {"random", "mean", "zero"}) {
        CHECK(j.at("masking").contains(s));
        CHECK(j.at("masking").at(s).contains("mean"));
    }
    const double ratio =
        j.at("overhead").at("full-model").at("expert_param_count").get<double>() /
        j.at("overhead").at("vanilla-fusion").at("expert_param_count").get<double>();
    CHECK(ratio > 3.9);
    CHECK(ratio < 4.1);
}

TEST_CASE("baseline training writes its summary") {
    const fs::path out = kWork / "baseline";
    const int rc = run("train --data " + data_dir().string() + " --out " + out.string() +
                       kTinyTrain + "--baseline early-fusion --seeds 0,1");
    REQUIRE(rc == 0);
    const json j = read_json(out / "summary.json");
    CHECK(j.at("baseline") == "early-fusion");
    CHECK(j.at("runs").size() == 2);
}

TEST_CASE("relative output paths honor the environment output root") {
    const fs::path root = kWork / "outroot";
    fs::create_directories(root);
    setenv("IMIX_OUT_ROOT", root.string().c_str(), 1);
    const int rc = run("gen --kind redundant --n 20 --dims 3,3 --out relgen");
    unsetenv("IMIX_OUT_ROOT");
    REQUIRE(rc == 0);
    CHECK(fs::exists(root / "relgen" / "manifest.json"));
}

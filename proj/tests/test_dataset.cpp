#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "imix/dataset.hpp"

using namespace imix;
namespace fs = std::filesystem;

namespace {

GenSpec base(GenKind k, std::uint64_t seed = 0) {
    GenSpec s;
    s.kind = k;
    s.n_samples = 400;
    s.dims = {3, 5};
    s.noise_sigma = 0.0;  // noiseless: labels are exact functions of features
    s.seed = seed;
    return s;
}

}  // namespace

TEST_CASE("generation is deterministic in the seed") {
    const auto a = generate(base(GenKind::SynergyXor, 7));
    const auto b = generate(base(GenKind::SynergyXor, 7));
    const auto c = generate(base(GenKind::SynergyXor, 8));
    CHECK(a.modalities[0].data == b.modalities[0].data);
    CHECK(a.modalities[1].data == b.modalities[1].data);
    CHECK(a.targets == b.targets);
    CHECK(a.modalities[0].data != c.modalities[0].data);
}

TEST_CASE("generated shapes match the spec") {
    const auto ds = generate(base(GenKind::Redundant));
    REQUIRE(ds.modalities.size() == 2);
    CHECK(ds.n_samples() == 400);
    CHECK(ds.modalities[0].dim == 3);
    CHECK(ds.modalities[1].dim == 5);
    CHECK(ds.targets.size() == 400);
    CHECK(ds.tags.empty());
    CHECK(ds.task == TaskKind::Multiclass);
    CHECK(ds.num_classes == 2);
}

TEST_CASE("unique labels follow the informative modality only") {
    for (int k : {1, 2}) {
        auto spec = base(GenKind::Unique, 3);
        spec.unique_k = k;
        const auto ds = generate(spec);
        for (std::size_t r = 0; r < ds.n_samples(); ++r) {
            const double v = ds.modalities[static_cast<std::size_t>(k) - 1].at(r, 0);
            CHECK(ds.targets[r] == (v > 0.0 ? 1.0 : 0.0));
        }
    }
}

TEST_CASE("redundant labels are recoverable from either modality") {
    const auto ds = generate(base(GenKind::Redundant, 5));
    for (std::size_t r = 0; r < ds.n_samples(); ++r) {
        const double a = ds.modalities[0].at(r, 0);
        const double b = ds.modalities[1].at(r, 0);
        CHECK((a > 0.0) == (b > 0.0));
        CHECK(ds.targets[r] == (a > 0.0 ? 1.0 : 0.0));
    }
}

TEST_CASE("xor labels are the parity of the informative signs") {
    const auto ds = generate(base(GenKind::SynergyXor, 5));
    std::size_t ones = 0;
    for (std::size_t r = 0; r < ds.n_samples(); ++r) {
        const int parity = ((ds.modalities[0].at(r, 0) > 0.0) ? 1 : 0) ^
                           ((ds.modalities[1].at(r, 0) > 0.0) ? 1 : 0);
        CHECK(ds.targets[r] == static_cast<double>(parity));
        ones += static_cast<std::size_t>(ds.targets[r]);
    }
    // Labels are roughly balanced.
    CHECK(ones > 150);
    CHECK(ones < 250);
}

TEST_CASE("noise perturbs but does not flip the informative coordinate at small sigma") {
    auto spec = base(GenKind::Redundant, 1);
    spec.noise_sigma = 0.2;
    const auto ds = generate(spec);
    std::size_t agree = 0;
    for (std::size_t r = 0; r < ds.n_samples(); ++r)
        if ((ds.modalities[0].at(r, 0) > 0.0) == (ds.targets[r] > 0.5)) ++agree;
    CHECK(agree > 390);  // sign flips need a > 5 sigma noise draw
}

TEST_CASE("mixture carries tags matching its proportions") {
    auto spec = base(GenKind::Mixture, 2);
    spec.n_samples = 4000;
    spec.proportions = {0.25, 0.25, 0.25, 0.25};
    const auto ds = generate(spec);
    REQUIRE(ds.tags.size() == ds.n_samples());
    std::size_t counts[4] = {0, 0, 0, 0};
    for (const auto& t : ds.tags) {
        if (t.kind == ExpertKind::Uniqueness) counts[t.modality - 1]++;
        else if (t.kind == ExpertKind::Synergy) counts[2]++;
        else counts[3]++;
    }
    for (std::size_t c : counts) {
        CHECK(c > 850);
        CHECK(c < 1150);
    }
    // Tagged samples obey their component's label rule.
    for (std::size_t r = 0; r < ds.n_samples(); ++r) {
        if (ds.tags[r].kind == ExpertKind::Uniqueness && ds.tags[r].modality == 1)
            CHECK(ds.targets[r] == (ds.modalities[0].at(r, 0) > 0.0 ? 1.0 : 0.0));
        if (ds.tags[r].kind == ExpertKind::Redundancy)
            CHECK((ds.modalities[0].at(r, 0) > 0.0) == (ds.modalities[1].at(r, 0) > 0.0));
    }
}

TEST_CASE("spec validation rejects bad inputs") {
    GenSpec s;
    s.dims = {4};
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = GenSpec{};
    s.n_samples = 0;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = GenSpec{};
    s.noise_sigma = -0.1;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = GenSpec{};
    s.kind = GenKind::Unique;
    s.unique_k = 3;
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s = GenSpec{};
    s.kind = GenKind::Mixture;
    s.proportions = {0.5, 0.5};  // needs dims.size()+2 entries
    CHECK_THROWS_AS(s.validate(), ConfigError);
    s.proportions = {0.5, 0.5, 0.5, 0.5};  // sums to 2
    CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("dataset directory io round-trips exactly") {
    auto spec = base(GenKind::Mixture, 9);
    spec.n_samples = 50;
    spec.noise_sigma = 0.37;
    spec.proportions = {0.3, 0.3, 0.2, 0.2};
    const auto ds = generate(spec);

    const fs::path dir = fs::temp_directory_path() / "imix_test_dataset_rt";
    fs::remove_all(dir);
    write_dataset(ds, dir);
    CHECK(fs::exists(dir / "manifest.json"));
    CHECK(fs::exists(dir / "m1.csv"));
    CHECK(fs::exists(dir / "m2.csv"));
    CHECK(fs::exists(dir / "labels.csv"));
    CHECK(fs::exists(dir / "tags.csv"));

    const auto back = read_dataset(dir);
    CHECK(back.task == ds.task);
    CHECK(back.num_classes == ds.num_classes);
    REQUIRE(back.modalities.size() == ds.modalities.size());
    for (std::size_t m = 0; m < ds.modalities.size(); ++m) {
        CHECK(back.modalities[m].dim == ds.modalities[m].dim);
        CHECK(back.modalities[m].data == ds.modalities[m].data);  // value-exact
    }
    CHECK(back.targets == ds.targets);
    REQUIRE(back.tags.size() == ds.tags.size());
    for (std::size_t r = 0; r < ds.tags.size(); ++r)
        CHECK(back.tags[r].label() == ds.tags[r].label());
    fs::remove_all(dir);
}

TEST_CASE("reader reports structured errors") {
    const fs::path dir = fs::temp_directory_path() / "imix_test_dataset_bad";
    fs::remove_all(dir);
    fs::create_directories(dir);
    CHECK_THROWS_AS(read_dataset(dir), IoError);  // no manifest

    auto spec = base(GenKind::Redundant, 4);
    spec.n_samples = 5;
    write_dataset(generate(spec), dir);

    // Ragged modality row.
    {
        std::ofstream out(dir / "m1.csv", std::ios::app);
        out << "1.0,2.0\n";
    }
    CHECK_THROWS_AS(read_dataset(dir), IoError);
    fs::remove_all(dir);
}

TEST_CASE("batch helpers slice rows and one-hot targets") {
    const auto ds = generate(base(GenKind::Redundant, 6));
    const std::vector<std::size_t> rows = {5, 0, 17};
    const Tensor f = ds.batch_features(1, rows);
    REQUIRE(f.rows() == 3);
    REQUIRE(f.cols() == 5);
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t c = 0; c < 5; ++c) CHECK(f.at(r, c) == ds.modalities[1].at(rows[r], c));
    const Tensor t = ds.batch_targets(rows);
    REQUIRE(t.rows() == 3);
    REQUIRE(t.cols() == 2);
    for (std::size_t r = 0; r < 3; ++r) {
        const std::size_t cls = static_cast<std::size_t>(ds.targets[rows[r]]);
        CHECK(t.at(r, cls) == 1.0);
        CHECK(t.at(r, 1 - cls) == 0.0);
    }
}

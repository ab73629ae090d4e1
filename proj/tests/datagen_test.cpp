#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <set>
#include <vector>

#include "fluxfed/datagen.hpp"
#include "fluxfed/dataset_io.hpp"
#include "fluxfed/errors.hpp"
#include "fluxfed/mnist.hpp"
#include "fluxfed/rng.hpp"

using namespace fluxfed;
namespace fs = std::filesystem;

namespace {

SyntheticParams small_params() {
    SyntheticParams p;
    p.num_classes = 6;
    p.feature_dim = 8;
    p.samples_per_client = 50;
    p.blob_spacing = 3.0;
    p.offset_scale = 4.0;
    return p;
}

double norm(const std::vector<double>& v) {
    double acc = 0.0;
    for (double x : v) acc += x * x;
    return std::sqrt(acc);
}

fs::path fresh_dir(const std::string& name) {
    fs::path dir = fs::temp_directory_path() / name;
    fs::remove_all(dir);
    return dir;
}

void write_be32(std::ofstream& f, std::uint32_t v) {
    unsigned char buf[4] = {static_cast<unsigned char>(v >> 24),
                            static_cast<unsigned char>(v >> 16),
                            static_cast<unsigned char>(v >> 8),
                            static_cast<unsigned char>(v)};
    f.write(reinterpret_cast<char*>(buf), 4);
}

// Minimal IDX pair: images filled with a per-image constant byte.
void write_idx(const fs::path& img_path, const fs::path& lab_path,
               const std::vector<unsigned char>& labels,
               std::uint32_t img_magic = 0x00000803u, std::uint32_t lab_magic = 0x00000801u,
               std::uint32_t side = 28, bool truncate_pixels = false) {
    std::ofstream img(img_path, std::ios::binary | std::ios::trunc);
    write_be32(img, img_magic);
    write_be32(img, static_cast<std::uint32_t>(labels.size()));
    write_be32(img, side);
    write_be32(img, side);
    std::size_t n_pix = truncate_pixels ? labels.size() - 1 : labels.size();
    for (std::size_t i = 0; i < n_pix; ++i) {
        std::vector<unsigned char> pix(784, static_cast<unsigned char>(i * 100));
        img.write(reinterpret_cast<char*>(pix.data()), 784);
    }
    img.close();
    std::ofstream lab(lab_path, std::ios::binary | std::ios::trunc);
    write_be32(lab, lab_magic);
    write_be32(lab, static_cast<std::uint32_t>(labels.size()));
    lab.write(reinterpret_cast<const char*>(labels.data()),
              static_cast<std::streamsize>(labels.size()));
}

}  // namespace

TEST_SUITE("datagen") {

TEST_CASE("shift names round-trip and reject junk") {
    for (auto t : {ShiftType::FeatureShift, ShiftType::LabelShift, ShiftType::ConceptYgivenX,
                   ShiftType::ConceptXgivenY})
        CHECK(shift_type_from_string(to_string(t)) == t);
    CHECK_THROWS_AS(shift_type_from_string("covariate"), ConfigError);
}

TEST_CASE("class means sit on the blob-spacing sphere") {
    FederationPlan plan = build_plan(small_params(), {ShiftType::FeatureShift, 1, 1}, 7);
    REQUIRE(plan.class_means.rows == 6);
    for (std::size_t u = 0; u < 6; ++u) {
        const double* row = plan.class_means.row(u);
        CHECK(norm({row, row + plan.feature_dim}) == doctest::Approx(3.0).epsilon(1e-12));
    }
}

TEST_CASE("feature-shift menus widen with the level") {
    // Level 2: three rotations, one (zero) color.
    FederationPlan l2 = build_plan(small_params(), {ShiftType::FeatureShift, 2, 3}, 11);
    std::set<double> rots;
    for (const auto& d : l2.distributions) {
        rots.insert(d.rotation_deg);
        CHECK(norm(d.offset) == 0.0);
    }
    CHECK(rots == std::set<double>{0.0, 120.0, 240.0});

    // Level 5: five rotations crossed with three colors; with M=3 each color
    // appears once, so exactly one distribution stays untinted.
    FederationPlan l5 = build_plan(small_params(), {ShiftType::FeatureShift, 5, 3}, 11);
    int untinted = 0;
    for (const auto& d : l5.distributions) {
        CHECK(std::fmod(d.rotation_deg, 72.0) == 0.0);
        double n = norm(d.offset);
        if (n == 0.0)
            ++untinted;
        else
            CHECK(n == doctest::Approx(4.0).epsilon(1e-12));
    }
    CHECK(untinted == 1);
}

TEST_CASE("label-shift keeps U - (level - 1) classes") {
    SyntheticParams p = small_params();
    p.num_classes = 10;
    FederationPlan plan = build_plan(p, {ShiftType::LabelShift, 8, 3}, 5);
    std::set<std::vector<int>> subsets;
    for (const auto& d : plan.distributions) {
        REQUIRE(d.class_subset.size() == 3);
        CHECK(std::is_sorted(d.class_subset.begin(), d.class_subset.end()));
        for (int y : d.class_subset) {
            CHECK(y >= 0);
            CHECK(y < 10);
        }
        subsets.insert(d.class_subset);
    }
    CHECK(subsets.size() == 3);  // laws must differ

    CHECK_THROWS_AS(build_plan(small_params(), {ShiftType::LabelShift, 6, 2}, 5), ConfigError);
    CHECK_THROWS_AS(build_plan(p, {ShiftType::LabelShift, 2, 6}, 5), ConfigError);
}

TEST_CASE("level-1 relabeling pool is the identity") {
    FederationPlan plan = build_plan(small_params(), {ShiftType::ConceptYgivenX, 1, 3}, 9);
    for (const auto& d : plan.distributions) {
        REQUIRE(d.pool.size() == 1);
        CHECK(d.pool_perm == d.pool);
    }
}

TEST_CASE("relabeling pools are derangement-free nowhere") {
    FederationPlan plan = build_plan(small_params(), {ShiftType::ConceptYgivenX, 3, 4}, 13);
    std::set<std::pair<std::vector<int>, std::vector<int>>> seen;
    for (const auto& d : plan.distributions) {
        REQUIRE(d.pool.size() == 3);
        CHECK(std::is_sorted(d.pool.begin(), d.pool.end()));
        CHECK(d.pool_perm != d.pool);
        CHECK(std::is_permutation(d.pool.begin(), d.pool.end(), d.pool_perm.begin()));
        seen.insert({d.pool, d.pool_perm});
    }
    CHECK(seen.size() == 4);
    CHECK_THROWS_AS(build_plan(small_params(), {ShiftType::ConceptYgivenX, 7, 1}, 13),
                    ConfigError);
}

TEST_CASE("feature-relabeling distributions share the augmented set") {
    FederationPlan plan = build_plan(small_params(), {ShiftType::ConceptXgivenY, 2, 4}, 17);
    std::set<double> angles;
    for (const auto& d : plan.distributions) {
        CHECK(d.augmented_classes == plan.distributions[0].augmented_classes);
        REQUIRE(d.augmented_classes.size() == 2);
        angles.insert(d.aug_rotation_deg);
    }
    CHECK(angles == std::set<double>{0.0, 90.0, 180.0, 270.0});
    CHECK_THROWS_AS(build_plan(small_params(), {ShiftType::ConceptXgivenY, 7, 1}, 17),
                    ConfigError);
}

TEST_CASE("plan validation rejects bad shapes") {
    CHECK_THROWS_AS(build_plan(small_params(), {ShiftType::FeatureShift, 0, 1}, 1), ConfigError);
    CHECK_THROWS_AS(build_plan(small_params(), {ShiftType::FeatureShift, 9, 1}, 1), ConfigError);
    CHECK_THROWS_AS(build_plan(small_params(), {ShiftType::FeatureShift, 1, 0}, 1), ConfigError);
    SyntheticParams p = small_params();
    p.num_classes = 1;
    CHECK_THROWS_AS(build_plan(p, {ShiftType::FeatureShift, 1, 1}, 1), ConfigError);
}

TEST_CASE("every distribution id is used and balanced") {
    auto clients = gen_synthetic_federation(12, small_params(), {ShiftType::FeatureShift, 5, 3}, 42);
    REQUIRE(clients.size() == 12);
    std::vector<int> counts(3, 0);
    for (std::size_t k = 0; k < clients.size(); ++k) {
        CHECK(clients[k].client_id == static_cast<int>(k));
        CHECK_FALSE(clients[k].is_test);
        CHECK(clients[k].train_count == 40);  // 4/5 of 50
        ++counts[static_cast<std::size_t>(clients[k].distribution_id)];
    }
    CHECK(counts == std::vector<int>{4, 4, 4});

    auto one = gen_synthetic_federation(5, small_params(), {ShiftType::FeatureShift, 3, 1}, 42);
    for (const auto& c : one) CHECK(c.distribution_id == 0);

    CHECK_THROWS_AS(gen_synthetic_federation(2, small_params(), {ShiftType::FeatureShift, 1, 3}, 1),
                    ConfigError);
}

TEST_CASE("generation is a pure function of its arguments") {
    auto a = gen_synthetic_federation(4, small_params(), {ShiftType::LabelShift, 3, 2}, 99);
    auto b = gen_synthetic_federation(4, small_params(), {ShiftType::LabelShift, 3, 2}, 99);
    REQUIRE(a.size() == b.size());
    for (std::size_t k = 0; k < a.size(); ++k) {
        CHECK(a[k].features.data == b[k].features.data);
        CHECK(a[k].labels == b[k].labels);
        CHECK(a[k].distribution_id == b[k].distribution_id);
    }
    auto c = gen_synthetic_federation(4, small_params(), {ShiftType::LabelShift, 3, 2}, 100);
    bool same = true;
    for (std::size_t k = 0; k < a.size(); ++k)
        same = same && a[k].features.data == c[k].features.data && a[k].labels == c[k].labels;
    CHECK_FALSE(same);
}

TEST_CASE("restricted-label clients stay inside their subset") {
    SyntheticParams p = small_params();
    p.num_classes = 10;
    p.samples_per_client = 200;
    ShiftSpec shift{ShiftType::LabelShift, 8, 3};
    FederationPlan plan = build_plan(p, shift, 31);
    auto clients = gen_synthetic_federation(6, p, shift, 31);
    for (const auto& c : clients) {
        const auto& subset = plan.distributions[static_cast<std::size_t>(c.distribution_id)]
                                 .class_subset;
        std::set<int> seen(c.labels.begin(), c.labels.end());
        CHECK(seen == std::set<int>(subset.begin(), subset.end()));
    }
}

TEST_CASE("label relabeling leaves the feature marginal untouched") {
    // Same seed, different relabeling levels: features must agree bitwise,
    // labels must not (level 3 moves at least two classes).
    auto l1 = gen_synthetic_federation(4, small_params(), {ShiftType::ConceptYgivenX, 1, 2}, 77);
    auto l3 = gen_synthetic_federation(4, small_params(), {ShiftType::ConceptYgivenX, 3, 2}, 77);
    bool labels_differ = false;
    for (std::size_t k = 0; k < l1.size(); ++k) {
        CHECK(l1[k].features.data == l3[k].features.data);
        labels_differ = labels_differ || l1[k].labels != l3[k].labels;
    }
    CHECK(labels_differ);
}

TEST_CASE("feature relabeling leaves the label marginal untouched") {
    // Identity pool on one side, rotated features on the other: the label
    // streams coincide draw for draw.
    auto rename = gen_synthetic_federation(4, small_params(), {ShiftType::ConceptYgivenX, 1, 2}, 55);
    auto rotate = gen_synthetic_federation(4, small_params(), {ShiftType::ConceptXgivenY, 4, 2}, 55);
    bool features_differ = false;
    for (std::size_t k = 0; k < rename.size(); ++k) {
        CHECK(rename[k].labels == rotate[k].labels);
        features_differ = features_differ || rename[k].features.data != rotate[k].features.data;
    }
    CHECK(features_differ);
}

TEST_CASE("held-out clients draw from the shared plan") {
    ShiftSpec shift{ShiftType::FeatureShift, 5, 3};
    FederationPlan plan = build_plan(small_params(), shift, 42);
    auto test = gen_test_clients(plan, small_params(), 2, 100, 42);
    REQUIRE(test.size() == 6);
    std::vector<int> want_dist{0, 0, 1, 1, 2, 2};
    for (std::size_t i = 0; i < test.size(); ++i) {
        CHECK(test[i].client_id == 100 + static_cast<int>(i));
        CHECK(test[i].distribution_id == want_dist[i]);
        CHECK(test[i].is_test);
    }
    // Client streams are id-keyed: same distribution, different id, new data.
    CHECK(test[0].features.data != test[1].features.data);

    auto again = gen_test_clients(plan, small_params(), 2, 100, 42);
    for (std::size_t i = 0; i < test.size(); ++i)
        CHECK(test[i].features.data == again[i].features.data);
}

TEST_CASE("dataset files survive a save/load round trip") {
    fs::path dir = fresh_dir("fluxfed_ds_roundtrip");
    SyntheticParams p = small_params();
    ShiftSpec shift{ShiftType::LabelShift, 2, 2};
    FederationData data;
    data.meta = {123, shift, p.num_classes, p.feature_dim};
    data.train = gen_synthetic_federation(3, p, shift, 123);
    FederationPlan plan = build_plan(p, shift, 123);
    data.test = gen_test_clients(plan, p, 1, 3, 123);

    save_federation(dir.string(), data);
    FederationData loaded = load_federation(dir.string());

    CHECK(loaded.meta.seed == 123);
    CHECK(loaded.meta.shift.type == ShiftType::LabelShift);
    CHECK(loaded.meta.shift.level == 2);
    CHECK(loaded.meta.shift.num_distributions == 2);
    CHECK(loaded.meta.num_classes == p.num_classes);
    CHECK(loaded.meta.feature_dim == p.feature_dim);
    REQUIRE(loaded.train.size() == 3);
    REQUIRE(loaded.test.size() == 2);
    for (std::size_t k = 0; k < 3; ++k) {
        CHECK(loaded.train[k].client_id == data.train[k].client_id);
        CHECK(loaded.train[k].features.data == data.train[k].features.data);
        CHECK(loaded.train[k].labels == data.train[k].labels);
        CHECK(loaded.train[k].train_count == data.train[k].train_count);
        CHECK(loaded.train[k].distribution_id == data.train[k].distribution_id);
        CHECK_FALSE(loaded.train[k].is_test);
    }
    for (std::size_t k = 0; k < 2; ++k) {
        CHECK(loaded.test[k].features.data == data.test[k].features.data);
        CHECK(loaded.test[k].is_test);
    }
}

TEST_CASE("corrupt dataset files report where parsing stopped") {
    fs::path dir = fresh_dir("fluxfed_ds_corrupt");
    SyntheticParams p = small_params();
    p.samples_per_client = 10;
    ShiftSpec shift{ShiftType::FeatureShift, 1, 1};
    FederationData data;
    data.meta = {5, shift, p.num_classes, p.feature_dim};
    data.train = gen_synthetic_federation(2, p, shift, 5);
    save_federation(dir.string(), data);

    SUBCASE("flipped magic byte") {
        std::fstream f(dir / "client_0000.bin",
                       std::ios::binary | std::ios::in | std::ios::out);
        f.seekp(0);
        f.put('X');
        f.close();
        try {
            load_federation(dir.string());
            FAIL("expected a parse failure");
        } catch (const ParseError& e) {
            CHECK(e.offset == 0);
            CHECK(std::string(e.what()).find("bad magic") != std::string::npos);
        }
    }
    SUBCASE("truncated payload") {
        fs::resize_file(dir / "client_0001.bin", 30);
        try {
            load_federation(dir.string());
            FAIL("expected a parse failure");
        } catch (const ParseError& e) {
            CHECK(e.offset == 30);
            CHECK(std::string(e.what()).find("payload size mismatch") != std::string::npos);
        }
    }
    SUBCASE("foreign manifest format") {
        std::ofstream mf(dir / "manifest.json", std::ios::trunc);
        mf << "{\"format\": \"OTHER\"}\n";
        mf.close();
        CHECK_THROWS_AS(load_federation(dir.string()), ParseError);
    }
    SUBCASE("missing manifest") {
        fs::remove(dir / "manifest.json");
        CHECK_THROWS_AS(load_federation(dir.string()), ConfigError);
    }
}

TEST_CASE("idx images load scaled with paired labels") {
    fs::path dir = fresh_dir("fluxfed_idx");
    fs::create_directories(dir);
    fs::path img = dir / "img.idx", lab = dir / "lab.idx";
    write_idx(img, lab, {0, 5, 9});

    MnistData d = load_mnist_idx(img.string(), lab.string());
    REQUIRE(d.features.rows == 3);
    CHECK(d.labels == std::vector<int>{0, 5, 9});
    CHECK(d.features.row(0)[0] == 0.0);
    CHECK(d.features.row(1)[17] == doctest::Approx(100.0 / 255.0).epsilon(1e-15));
    CHECK(d.features.row(2)[783] == doctest::Approx(200.0 / 255.0).epsilon(1e-15));

    MnistData capped = load_mnist_idx(img.string(), lab.string(), 2);
    CHECK(capped.features.rows == 2);
    CHECK(capped.labels == std::vector<int>{0, 5});
}

TEST_CASE("idx validation pinpoints malformed headers") {
    fs::path dir = fresh_dir("fluxfed_idx_bad");
    fs::create_directories(dir);
    fs::path img = dir / "img.idx", lab = dir / "lab.idx";

    SUBCASE("wrong image magic") {
        write_idx(img, lab, {1, 2}, 0x00000802u);
        try {
            load_mnist_idx(img.string(), lab.string());
            FAIL("expected a parse failure");
        } catch (const ParseError& e) {
            CHECK(e.offset == 0);
            CHECK(std::string(e.what()).find("bad image magic") != std::string::npos);
        }
    }
    SUBCASE("wrong label magic") {
        write_idx(img, lab, {1, 2}, 0x00000803u, 0x00000800u);
        CHECK_THROWS_AS(load_mnist_idx(img.string(), lab.string()), ParseError);
    }
    SUBCASE("unexpected geometry") {
        write_idx(img, lab, {1, 2}, 0x00000803u, 0x00000801u, 14);
        CHECK_THROWS_AS(load_mnist_idx(img.string(), lab.string()), ParseError);
    }
    SUBCASE("truncated pixels") {
        write_idx(img, lab, {1, 2}, 0x00000803u, 0x00000801u, 28, true);
        CHECK_THROWS_AS(load_mnist_idx(img.string(), lab.string()), ParseError);
    }
    SUBCASE("label out of range") {
        write_idx(img, lab, {1, 10});
        try {
            load_mnist_idx(img.string(), lab.string());
            FAIL("expected a parse failure");
        } catch (const ParseError& e) {
            CHECK(std::string(e.what()).find("label out of range") != std::string::npos);
        }
    }
}

TEST_CASE("right-angle image rotation is an exact permutation") {
    Matrix one(1, 784);
    one.row(0)[0] = 1.0;  // pixel (0, 0)
    Matrix r90 = apply_rotation_to_images(one, 90);
    for (std::size_t j = 0; j < 784; ++j)
        CHECK(r90.row(0)[j] == (j == 27 ? 1.0 : 0.0));  // lands at (0, 27)

    RngStream rng(3);
    Matrix noise(2, 784);
    for (double& x : noise.data) x = rng.next_real();
    Matrix once = apply_rotation_to_images(noise, 90);
    Matrix quad = apply_rotation_to_images(
        apply_rotation_to_images(apply_rotation_to_images(once, 90), 90), 90);
    CHECK(quad.data == noise.data);
    Matrix twice = apply_rotation_to_images(once, 90);
    CHECK(twice.data == apply_rotation_to_images(noise, 180).data);
    CHECK(apply_rotation_to_images(noise, 0).data == noise.data);

    CHECK_THROWS_AS(apply_rotation_to_images(noise, 45), ConfigError);
    Matrix wrong(1, 100);
    CHECK_THROWS_AS(apply_rotation_to_images(wrong, 90), ConfigError);
}

}  // TEST_SUITE

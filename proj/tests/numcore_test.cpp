#include <doctest.h>

#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "fluxfed/errors.hpp"
#include "fluxfed/jacobi.hpp"
#include "fluxfed/matrix.hpp"
#include "fluxfed/mlp.hpp"
#include "fluxfed/rng.hpp"

using namespace fluxfed;

namespace {

// Independently typed SplitMix64 (constants from the published reference),
// kept separate from rng.hpp so a typo there cannot self-validate.
std::uint64_t reference_splitmix64(std::uint64_t& x) {
    x += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

Matrix random_matrix(std::size_t rows, std::size_t cols, RngStream& rng, double scale = 1.0) {
    Matrix m(rows, cols);
    for (double& v : m.data) v = scale * rng.next_gaussian();
    return m;
}

}  // namespace

TEST_SUITE("numcore") {

TEST_CASE("splitmix64 matches the reference stream") {
    std::uint64_t s0 = 0;
    CHECK(splitmix64_next(s0) == 0xE220A8397B1DCDAFULL);

    for (std::uint64_t seed : {0ULL, 1ULL, 42ULL, 0x8000000000000000ULL}) {
        std::uint64_t a = seed, b = seed;
        for (int i = 0; i < 64; ++i) CHECK(splitmix64_next(a) == reference_splitmix64(b));
    }
}

TEST_CASE("rng streams are deterministic and seed-sensitive") {
    RngStream a(7), b(7), c(8);
    for (int i = 0; i < 16; ++i) CHECK(a.next_u64() == b.next_u64());
    CHECK(RngStream(7).next_u64() != c.next_u64());
}

TEST_CASE("uniform draws respect their ranges") {
    RngStream rng(123);
    for (int i = 0; i < 1000; ++i) {
        double u = rng.next_real();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        double v = rng.next_real_open();
        CHECK(v > 0.0);
        CHECK(v < 1.0);
        std::uint64_t k = rng.next_index(7);
        CHECK(k < 7);
    }
}

TEST_CASE("next_index covers every residue") {
    RngStream rng(5);
    std::vector<int> hits(5, 0);
    for (int i = 0; i < 500; ++i) ++hits[rng.next_index(5)];
    for (int h : hits) CHECK(h > 0);
}

TEST_CASE("shuffle is a permutation") {
    RngStream rng(99);
    std::vector<int> v(20);
    std::iota(v.begin(), v.end(), 0);
    rng.shuffle(v);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    for (int i = 0; i < 20; ++i) CHECK(sorted[i] == i);
}

TEST_CASE("derive_stream isolates tagged children") {
    // Same master, different (tag, k, r) keys -> different streams; same keys
    // -> identical streams. Client training depends on exactly (seed, k, r).
    RngStream a = derive_stream(42, stream_tag::kTrain, 3, 5);
    RngStream b = derive_stream(42, stream_tag::kTrain, 3, 5);
    RngStream c = derive_stream(42, stream_tag::kTrain, 4, 5);
    RngStream d = derive_stream(42, stream_tag::kTrain, 3, 6);
    RngStream e = derive_stream(43, stream_tag::kTrain, 3, 5);
    std::uint64_t va = a.next_u64();
    CHECK(va == b.next_u64());
    CHECK(va != c.next_u64());
    CHECK(va != d.next_u64());
    CHECK(va != e.next_u64());

    RngStream one = derive_stream(42, stream_tag::kPca);
    RngStream two = derive_stream(42, stream_tag::kPca, 0);
    CHECK(one.next_u64() != two.next_u64());  // arity participates in the key
}

TEST_CASE("matrix is row-major") {
    Matrix m(2, 3);
    m.at(1, 2) = 5.0;
    CHECK(m.data[5] == 5.0);
    CHECK(m.row(1)[2] == 5.0);
}

TEST_CASE("jacobi solves a hand 2x2") {
    Matrix a(2, 2);
    a.at(0, 0) = 2.0; a.at(0, 1) = 1.0;
    a.at(1, 0) = 1.0; a.at(1, 1) = 2.0;
    EigenDecomposition e = jacobi_eigen_symmetric(a);
    REQUIRE(e.values.size() == 2);
    CHECK(e.values[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(e.values[1] == doctest::Approx(1.0).epsilon(1e-12));
    // Leading eigenvector is (1,1)/sqrt(2) up to sign.
    double r = e.vectors.at(0, 0) / e.vectors.at(1, 0);
    CHECK(r == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("jacobi reconstructs random symmetric matrices") {
    RngStream rng(2024);
    for (int trial = 0; trial < 5; ++trial) {
        const std::size_t n = 6;
        Matrix a(n, n);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i; j < n; ++j) {
                double v = rng.next_gaussian();
                a.at(i, j) = v;
                a.at(j, i) = v;
            }
        EigenDecomposition e = jacobi_eigen_symmetric(a);
        for (std::size_t i = 1; i < n; ++i) CHECK(e.values[i - 1] >= e.values[i]);
        // Columns orthonormal.
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = 0; q < n; ++q) {
                double dot = 0.0;
                for (std::size_t i = 0; i < n; ++i)
                    dot += e.vectors.at(i, p) * e.vectors.at(i, q);
                CHECK(dot == doctest::Approx(p == q ? 1.0 : 0.0).epsilon(1e-9));
            }
        // A == V diag(values) V^T.
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                double acc = 0.0;
                for (std::size_t k = 0; k < n; ++k)
                    acc += e.vectors.at(i, k) * e.values[k] * e.vectors.at(j, k);
                CHECK(acc == doctest::Approx(a.at(i, j)).epsilon(1e-9));
            }
    }
}

TEST_CASE("zero parameters give zero logits and latents") {
    MlpModel m(4, 3, 2);
    m.set_params(ParamVector(m.param_count(), 0.0));
    RngStream rng(1);
    Matrix x = random_matrix(5, 4, rng);
    std::vector<double> logits(2), latents(3);
    for (std::size_t i = 0; i < x.rows; ++i) {
        m.forward(x.row(i), logits.data(), latents.data());
        for (double v : logits) CHECK(v == 0.0);
        for (double v : latents) CHECK(v == 0.0);
    }
}

TEST_CASE("softmax rows sum to one") {
    RngStream rng(3);
    for (int trial = 0; trial < 100; ++trial) {
        double logits[6], probs[6];
        for (double& v : logits) v = 50.0 * rng.next_gaussian();
        MlpModel::softmax_row(logits, probs, 6);
        double sum = 0.0;
        for (double p : probs) {
            CHECK(p >= 0.0);
            sum += p;
        }
        CHECK(std::fabs(sum - 1.0) <= 1e-12);
    }
}

TEST_CASE("analytic gradient matches central differences") {
    RngStream rng(77);
    MlpModel m(5, 4, 3);
    m.init(rng);
    Matrix x = random_matrix(10, 5, rng);
    std::vector<int> y(10);
    for (int& v : y) v = static_cast<int>(rng.next_index(3));
    DataView view{&x, &y, 0, 10};

    ParamVector grad;
    m.loss_and_gradient(view, grad);
    REQUIRE(grad.size() == m.param_count());

    ParamVector p = m.params();
    for (std::size_t i = 0; i < p.size(); ++i) {
        double h = 1e-5 * std::max(1.0, std::fabs(p[i]));
        ParamVector pp = p, pm = p;
        pp[i] += h;
        pm[i] -= h;
        MlpModel probe = m;
        probe.set_params(pp);
        double lp = probe.loss(view);
        probe.set_params(pm);
        double lm = probe.loss(view);
        double fd = (lp - lm) / (2.0 * h);
        double denom = std::max({std::fabs(grad[i]), std::fabs(fd), 1e-8});
        CHECK(std::fabs(grad[i] - fd) / denom <= 1e-4);
    }
}

TEST_CASE("zero learning rate leaves parameters untouched") {
    RngStream rng(8);
    MlpModel m(3, 4, 2);
    m.init(rng);
    ParamVector before = m.params();
    Matrix x = random_matrix(12, 3, rng);
    std::vector<int> y(12);
    for (int& v : y) v = static_cast<int>(rng.next_index(2));
    TrainOptions opt;
    opt.learning_rate = 0.0;
    RngStream train_rng(5);
    mlp_train_local(m, DataView{&x, &y, 0, 12}, opt, train_rng);
    CHECK(m.params() == before);
}

TEST_CASE("one epoch reduces loss on a separable problem") {
    RngStream rng(11);
    Matrix x(40, 2);
    std::vector<int> y(40);
    for (std::size_t i = 0; i < 40; ++i) {
        y[i] = i % 2;
        x.at(i, 0) = (y[i] == 0 ? -3.0 : 3.0) + 0.1 * rng.next_gaussian();
        x.at(i, 1) = rng.next_gaussian();
    }
    DataView view{&x, &y, 0, 40};
    MlpModel m(2, 8, 2);
    m.init(rng);
    double before = m.loss(view);
    TrainOptions opt;
    opt.epochs = 1;
    RngStream train_rng(9);
    mlp_train_local(m, view, opt, train_rng);
    CHECK(m.loss(view) < before);
}

TEST_CASE("training is bit-identical given the same stream") {
    RngStream rng(21);
    Matrix x = random_matrix(30, 4, rng);
    std::vector<int> y(30);
    for (int& v : y) v = static_cast<int>(rng.next_index(3));
    DataView view{&x, &y, 0, 30};

    MlpModel a(4, 6, 3), b(4, 6, 3);
    RngStream ia(2), ib(2);
    a.init(ia);
    b.init(ib);
    TrainOptions opt;
    RngStream ra(33), rb(33);
    mlp_train_local(a, view, opt, ra);
    mlp_train_local(b, view, opt, rb);
    CHECK(a.params() == b.params());
}

TEST_CASE("weighted_param_mean hand values") {
    ParamVector p1{1.0, 1.0}, p2{3.0, 3.0};
    ParamVector m = weighted_param_mean({&p1, &p2}, {1.0, 1.0});
    CHECK(m == ParamVector{2.0, 2.0});

    ParamVector q1{0.0, 0.0}, q2{4.0, 0.0};
    m = weighted_param_mean({&q1, &q2}, {3.0, 1.0});
    CHECK(m == ParamVector{1.0, 0.0});

    m = weighted_param_mean({&p2}, {5.0});
    CHECK(m == p2);
}

TEST_CASE("weighted_param_mean is permutation invariant and idempotent") {
    ParamVector p1{1.0, -2.0, 0.5}, p2{2.0, 4.0, -1.0}, p3{0.0, 1.0, 1.0};
    ParamVector ab = weighted_param_mean({&p1, &p2, &p3}, {2.0, 1.0, 3.0});
    ParamVector ba = weighted_param_mean({&p3, &p1, &p2}, {3.0, 2.0, 1.0});
    for (std::size_t i = 0; i < ab.size(); ++i)
        CHECK(ab[i] == doctest::Approx(ba[i]).epsilon(1e-15));

    ParamVector same = weighted_param_mean({&p1, &p1, &p1}, {1.0, 2.0, 3.0});
    CHECK(same == p1);
}

TEST_CASE("weighted_param_mean rejects malformed input") {
    ParamVector p1{1.0, 2.0}, p_short{1.0};
    CHECK_THROWS(weighted_param_mean({}, {}));
    CHECK_THROWS(weighted_param_mean({&p1}, {0.0}));
    CHECK_THROWS(weighted_param_mean({&p1}, {-1.0}));
    CHECK_THROWS(weighted_param_mean({&p1, &p_short}, {1.0, 1.0}));
}

TEST_CASE("loss rejects labels out of range") {
    MlpModel m(2, 3, 2);
    RngStream rng(4);
    m.init(rng);
    Matrix x = random_matrix(4, 2, rng);
    std::vector<int> bad{0, 1, 2, 0};  // class 2 does not exist
    CHECK_THROWS(m.loss(DataView{&x, &bad, 0, 4}));
}

}  // TEST_SUITE

#include <doctest.h>

#include <cmath>

#include "aznas/linalg.hpp"
#include "aznas/rng.hpp"

using namespace aznas;

namespace {

Matrix random_matrix(int r, int c, SeqRng& rng) {
    Matrix m(r, c);
    for (auto& v : m.data) v = rng.uniform01() * 2.0 - 1.0;
    return m;
}

Matrix gram(const Matrix& m) {  // M^T M
    Matrix g(m.cols, m.cols);
    for (int i = 0; i < m.cols; ++i)
        for (int j = i; j < m.cols; ++j) {
            double s = 0.0;
            for (int k = 0; k < m.rows; ++k) s += m.at(k, i) * m.at(k, j);
            g.at(i, j) = g.at(j, i) = s;
        }
    return g;
}

}  // namespace

TEST_SUITE("linalg") {

TEST_CASE("jacobi: hand 2x2 and diagonal") {
    Matrix a(2, 2);
    a.at(0, 0) = 2;
    a.at(0, 1) = a.at(1, 0) = 1;
    a.at(1, 1) = 2;
    const auto eig = symmetric_eigenvalues(a);
    CHECK(eig[0] == doctest::Approx(3.0).epsilon(1e-12));
    CHECK(eig[1] == doctest::Approx(1.0).epsilon(1e-12));

    Matrix d(3, 3);
    d.at(0, 0) = -1;
    d.at(1, 1) = 5;
    d.at(2, 2) = 2;
    const auto ed = symmetric_eigenvalues(d);
    CHECK(ed[0] == doctest::Approx(5.0));
    CHECK(ed[1] == doctest::Approx(2.0));
    CHECK(ed[2] == doctest::Approx(-1.0));
}

TEST_CASE("jacobi preserves trace and Frobenius norm") {
    SeqRng rng(5);
    for (int trial = 0; trial < 10; ++trial) {
        const int n = 2 + static_cast<int>(rng.below(20));
        Matrix a(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = i; j < n; ++j) a.at(i, j) = a.at(j, i) = rng.uniform01() - 0.5;
        double tr = 0.0, fr = 0.0;
        for (int i = 0; i < n; ++i) tr += a.at(i, i);
        for (double v : a.data) fr += v * v;
        const auto eig = symmetric_eigenvalues(a);
        double tr2 = 0.0, fr2 = 0.0;
        for (double e : eig) {
            tr2 += e;
            fr2 += e * e;
        }
        CHECK(tr2 == doctest::Approx(tr).epsilon(1e-10));
        CHECK(fr2 == doctest::Approx(fr).epsilon(1e-10));
    }
}

TEST_CASE("spectral norm of diagonal and orthogonal matrices") {
    Matrix d(2, 2);
    d.at(0, 0) = 3;
    d.at(1, 1) = 1;
    CHECK(spectral_norm(d, 500, 1e-12, 1).sigma == doctest::Approx(3.0).epsilon(1e-6));

    const double th = 0.7;
    Matrix q(2, 2);
    q.at(0, 0) = std::cos(th);
    q.at(0, 1) = -std::sin(th);
    q.at(1, 0) = std::sin(th);
    q.at(1, 1) = std::cos(th);
    CHECK(spectral_norm(q, 500, 1e-12, 2).sigma == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("power iteration agrees with the dense eigensolver of M^T M") {
    SeqRng rng(123);
    for (int trial = 0; trial < 20; ++trial) {
        const int r = 2 + static_cast<int>(rng.below(15));
        const int c = 2 + static_cast<int>(rng.below(15));
        const Matrix m = random_matrix(r, c, rng);
        const double sigma = spectral_norm(m, 20000, 1e-14, 42 + trial).sigma;
        const auto eig = symmetric_eigenvalues(gram(m));
        const double exact = std::sqrt(std::max(eig[0], 0.0));
        CHECK(std::abs(sigma - exact) / exact < 1e-6);
    }
}

TEST_CASE("all-zero matrix degenerates to the floor value") {
    Matrix z(4, 5);
    const auto r = spectral_norm(z, 100, 1e-9, 7, 1e-10);
    CHECK(r.degenerate);
    CHECK(r.sigma == 1e-10);
}

TEST_CASE("non-finite input is rejected") {
    Matrix m(2, 2);
    m.at(1, 1) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS_AS(spectral_norm(m, 10, 1e-6, 1), ArgumentError);
}

}  // TEST_SUITE

#include "aznas/linalg.hpp"

#include <algorithm>
#include <cmath>

#include "aznas/errors.hpp"
#include "aznas/rng.hpp"

namespace aznas {

std::vector<double> symmetric_eigenvalues(const Matrix& sym) {
    if (sym.rows != sym.cols) throw ArgumentError("symmetric_eigenvalues: not square");
    const int n = sym.rows;
    if (n == 0) return {};
    Matrix a = sym;

    auto off_norm = [&]() {
        double s = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) s += a.at(p, q) * a.at(p, q);
        return std::sqrt(2.0 * s);
    };
    double frob = 0.0;
    for (double v : a.data) frob += v * v;
    frob = std::sqrt(frob);
    const double stop = std::max(frob, 1.0) * 1e-15 * n;

    const int max_sweeps = 64;
    for (int sweep = 0; sweep < max_sweeps && off_norm() > stop; ++sweep) {
        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a.at(p, q);
                if (apq == 0.0) continue;
                const double app = a.at(p, p), aqq = a.at(q, q);
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (int k = 0; k < n; ++k) {
                    const double akp = a.at(k, p), akq = a.at(k, q);
                    a.at(k, p) = c * akp - s * akq;
                    a.at(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a.at(p, k), aqk = a.at(q, k);
                    a.at(p, k) = c * apk - s * aqk;
                    a.at(q, k) = s * apk + c * aqk;
                }
            }
        }
    }

    std::vector<double> eig(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) eig[static_cast<std::size_t>(i)] = a.at(i, i);
    std::sort(eig.begin(), eig.end(), std::greater<double>());
    return eig;
}

SpectralNormResult spectral_norm(const Matrix& m, int max_iters, double tol,
                                 std::uint64_t seed, double floor_value) {
    if (max_iters < 1) throw ArgumentError("spectral_norm: max_iters must be >= 1");
    for (double v : m.data)
        if (!std::isfinite(v)) throw ArgumentError("spectral_norm: non-finite input");

    SpectralNormResult res;
    const int r = m.rows, c = m.cols;
    if (r == 0 || c == 0) {
        res.sigma = floor_value;
        res.degenerate = true;
        return res;
    }

    const CounterRng rng = CounterRng(seed).keyed("power-start");
    std::vector<double> v(static_cast<std::size_t>(c));
    double nrm = 0.0;
    for (int i = 0; i < c; ++i) {
        v[static_cast<std::size_t>(i)] = rng.gaussian(static_cast<std::uint64_t>(i));
        nrm += v[static_cast<std::size_t>(i)] * v[static_cast<std::size_t>(i)];
    }
    nrm = std::sqrt(nrm);
    for (double& x : v) x /= nrm;

    std::vector<double> mv(static_cast<std::size_t>(r));
    std::vector<double> w(static_cast<std::size_t>(c));
    double prev_rho = -1.0;
    for (int it = 0; it < max_iters; ++it) {
        res.iterations = it + 1;
        // mv = M v
        for (int i = 0; i < r; ++i) {
            double acc = 0.0;
            const double* row = &m.data[static_cast<std::size_t>(i) * c];
            for (int j = 0; j < c; ++j) acc += row[j] * v[static_cast<std::size_t>(j)];
            mv[static_cast<std::size_t>(i)] = acc;
        }
        // w = M^T mv ; rho = v^T w = |M v|^2
        std::fill(w.begin(), w.end(), 0.0);
        for (int i = 0; i < r; ++i) {
            const double s = mv[static_cast<std::size_t>(i)];
            if (s == 0.0) continue;
            const double* row = &m.data[static_cast<std::size_t>(i) * c];
            for (int j = 0; j < c; ++j) w[static_cast<std::size_t>(j)] += row[j] * s;
        }
        double rho = 0.0;
        for (int j = 0; j < c; ++j) rho += v[static_cast<std::size_t>(j)] * w[static_cast<std::size_t>(j)];

        double wn = 0.0;
        for (double x : w) wn += x * x;
        wn = std::sqrt(wn);
        if (wn == 0.0 || rho <= 0.0) {
            // M v vanished; with a random start this means M is (numerically) zero.
            res.sigma = floor_value;
            res.degenerate = true;
            return res;
        }
        for (int j = 0; j < c; ++j) v[static_cast<std::size_t>(j)] = w[static_cast<std::size_t>(j)] / wn;

        if (prev_rho >= 0.0 && std::abs(rho - prev_rho) < tol * std::max(rho, 1e-300)) {
            prev_rho = rho;
            break;
        }
        prev_rho = rho;
    }
    res.sigma = std::max(std::sqrt(std::max(prev_rho, 0.0)), floor_value);
    return res;
}

}  // namespace aznas

#pragma once

#include <cstdint>
#include <vector>

#include "aznas/tensor.hpp"

namespace aznas {

// Eigenvalues of a symmetric matrix via cyclic Jacobi rotations, sorted
// descending. The input is copied; c up to a few hundred is fine.
std::vector<double> symmetric_eigenvalues(const Matrix& sym);

struct SpectralNormResult {
    double sigma = 0.0;
    bool degenerate = false;  // all-zero input (or collapse to zero)
    int iterations = 0;
};

// Largest singular value of M via power iteration on M^T M with a
// deterministic seeded start vector. Stops after `max_iters` or when
// successive Rayleigh estimates differ relatively by less than `tol`.
// The result is clamped below by `floor_value`.
SpectralNormResult spectral_norm(const Matrix& m, int max_iters, double tol,
                                 std::uint64_t seed, double floor_value = 1e-10);

}  // namespace aznas

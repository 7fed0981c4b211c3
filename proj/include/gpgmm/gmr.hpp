#pragma once

#include "gpgmm/hgmm.hpp"

#include <vector>

namespace gpgmm {

struct GmrPrediction {
    double mean = 0.0;
    double variance = 0.0;
    /// Every active log-density was below -700 (the linear-space weights would
    /// underflow to 0/0).
    bool underflow = false;
};

struct Conditional {
    double mean = 0.0;
    double variance = 0.0;
};

/// Distance distribution of one component conditioned on position:
/// mean mu_Y - Lambda_YY^-1 Lambda_YX (x - mu_X), variance Lambda_YY^-1.
Conditional conditional(const Gaussian4 &component, const Vec3 &x);

/// Indices of the min(J, #leaves) leaves with the largest pi_j N(x | mu_jX, Sigma_jXX),
/// ordered by decreasing weighted density; ties go to the lower index.
std::vector<std::size_t> select_active(const HgmmModel &model, const Vec3 &x, std::size_t j);

/// Mixture regression over the J active leaves.
GmrPrediction regress(const HgmmModel &model, const Vec3 &x, std::size_t j);

/// Mixture regression restricted to a fixed set of leaves.
GmrPrediction regress_with(const HgmmModel &model, const Vec3 &x, const std::vector<std::size_t> &active);

/// Central-difference gradient of the regressed mean. The active set is
/// frozen at select_active(model, x, J) for all six evaluations.
Vec3 regress_gradient(const HgmmModel &model, const Vec3 &x, std::size_t j, double h = 1e-4);

}  // namespace gpgmm

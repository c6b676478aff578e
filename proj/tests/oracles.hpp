#pragma once

// Reference computations used only by the test suites. Each one takes a
// different route from the library code it checks.

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "multida/dataset.hpp"
#include "multida/partitions.hpp"

namespace multida::oracle {

// Bell numbers B_0..B_k from the Bell triangle.
std::vector<std::uint64_t> bell_triangle(int k);

// All set partitions of {0..k-1} built by inserting each element into an
// existing block or a new one. Returned as group labels in block-creation order.
std::vector<std::vector<int>> brute_force_partitions(int k);

// Exact posterior over hypotheses for one feature: evaluates each hypothesis's
// maximized log-likelihood sample by sample, adds log prior -C*nu_m, normalizes.
std::vector<double> posterior(std::span<const double> x, std::span<const int> y,
                              const std::vector<std::vector<int>>& columns, VarianceMode mode,
                              double penalty_c);

// Maximized per-feature Gaussian log-likelihood under one hypothesis.
double max_loglik(std::span<const double> x, std::span<const int> y, const std::vector<int>& labels,
                  VarianceMode mode);

struct NelderMeadResult {
    std::vector<double> x;
    double value = 0.0;
};

// Derivative-free minimizer with restarts.
NelderMeadResult nelder_mead(const std::function<double(const std::vector<double>&)>& f,
                             std::vector<double> start, double step, int restarts = 8);

struct NumericMle {
    std::vector<double> mu;      // per group
    std::vector<double> sigma2;  // one entry (equal) or per group (unequal)
};

// Maximizes the Gaussian log-likelihood numerically over means and log-variances.
NumericMle numeric_mle(std::span<const double> x, std::span<const int> y,
                       const std::vector<int>& labels, VarianceMode mode);

// Random dataset with every class holding at least `min_per_class` samples.
Dataset random_dataset(std::mt19937_64& rng, std::size_t n, std::size_t p, int classes,
                       int min_per_class = 1, double spread = 1.0);

}  // namespace multida::oracle

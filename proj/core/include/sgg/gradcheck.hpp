#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sgg/nn.hpp"

namespace sgg::gradcheck {

inline constexpr double kStep = 1e-6;

// max|a - n| / max(max|a|, max|n|, 1e-8).
double rel_err(const std::vector<double>& analytic, const std::vector<double>& numeric);

// Central differences of f with respect to every element of `leaf`.
std::vector<double> numeric_grad(const std::function<double()>& f, num::Tensor leaf, double h = kStep);

struct Row {
  std::string name;  // parameter group or op case
  std::size_t scalars = 0;
  double max_rel_err = 0.0;
  double tolerance = 0.0;
  bool pass() const { return max_rel_err < tolerance; }
};

struct Report {
  std::string scope;
  std::vector<Row> rows;
  double seconds = 0.0;
  bool pass() const;
  double worst() const;
};

// Analytic (backward) versus numeric gradients of loss() for each leaf.
// Leaves are grouped by `group(name)`; one row per group.
std::vector<Row> check(const std::function<num::Tensor()>& loss, const std::vector<nn::NamedTensor>& leaves,
                       double tolerance, const std::function<std::string(const std::string&)>& group = {},
                       double h = kStep);

// Every differentiable tensor op on `trials` random shapes each.
Report check_ops(std::uint64_t seed, std::size_t trials = 3);
// GRU fact encoder, refinement stages, heads, loss, generator and discriminator.
Report check_modules(std::uint64_t seed);
// Scene-graph loss plus both image-branch objectives on a 2-object scene,
// with respect to every parameter of a reduced-width model (16x16 generator).
Report check_end2end(std::uint64_t seed);

std::string format_table(const Report& report);

}  // namespace sgg::gradcheck

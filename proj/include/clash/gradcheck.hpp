#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "clash/ops.hpp"
#include "clash/rng.hpp"
#include "clash/tape.hpp"

namespace clash::ad {

// Builds the graph under test from leaves already registered on the tape.
// The output may have any shape; the harness projects it to a scalar with a
// random constant tensor before differentiating.
using GraphBuilder = std::function<Tensor(Tape&, const std::vector<Tensor>&)>;

// Fills base values for each leaf; the default draws uniform(-1, 1).
using LeafSampler =
    std::function<void(Rng&, std::vector<std::vector<double>>&)>;

struct GradcheckSpec {
  std::string name;
  std::vector<Shape> shapes;
  GraphBuilder build;
  LeafSampler sample;  // empty -> uniform(-1, 1)
  int trials = 20;
  double eps = 1e-5;
  double tol = 1e-4;
};

struct GradcheckResult {
  std::string name;
  double max_rel = 0.0;
  int trials = 0;
  bool ok = false;
};

// Compares the analytic directional derivative against a central finite
// difference along a random unit direction, once per trial.
GradcheckResult run_gradcheck(const GradcheckSpec& spec, std::uint64_t seed);

// Values with pairwise gaps and kink distances far above eps, for ops whose
// derivative jumps at ties or at zero (max pools, relu, clamp).
LeafSampler margin_sampler();

// Strictly positive values, for log/sqrt/reciprocal and pow bases.
LeafSampler positive_sampler();

// Named checks covering every autodiff primitive.
std::vector<GradcheckSpec> primitive_gradchecks();

}  // namespace clash::ad

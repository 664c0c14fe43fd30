#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "clash/dataset.hpp"
#include "clash/supernet.hpp"

namespace clash::net {

struct SearchConfig {
  SupernetConfig net;
  int u = 1;        // weight steps per architecture step
  double lr_w = 1e-3;
  double lr_alpha = 1e-3;
  int p = 2;        // identities per batch
  int k = 2;        // clips per identity
  int iterations = 2000;  // outer iterations (= architecture steps)
  int retrain_iterations = 3000;
  double val_fraction = 0.5;
  std::uint64_t seed = 7;
  int checkpoint_every = 500;  // 0 disables periodic checkpoints
};

// Rejects out-of-range values with a contract error naming the field.
void validate(const SearchConfig& cfg);

struct SearchResult {
  CellArchitecture arch;  // final relaxed logits
  std::vector<double> train_loss;  // one entry per weight step
  std::vector<double> val_loss;    // one entry per architecture step
  std::int64_t w_steps = 0;
  std::int64_t alpha_steps = 0;
  int single_identity_warnings = 0;
  // Row 0 is the initial alpha; one row after each architecture step.
  std::vector<std::array<std::array<double, kNumOps>, kNumEdges>>
      alpha_history;
};

// Alternating first-order bilevel loop: per outer iteration, u Adam steps
// on the weights (train batches) followed by one Adam step on alpha (val
// batch, gradient taken at the current weights). Periodic checkpoints land
// in out_dir when it is non-empty. A non-finite loss or gradient aborts
// with a numeric error naming the iteration and the last good checkpoint.
SearchResult search(const SearchConfig& cfg, const data::GaitDataset& train,
                    const data::GaitDataset& val, const std::string& out_dir);

struct RetrainResult {
  std::unique_ptr<Supernet> net;
  std::vector<double> train_loss;
  int single_identity_warnings = 0;
};

// Trains a freshly initialized supernet under the fixed discrete
// architecture (alpha is unused). Zero iterations returns the net at
// initialization.
RetrainResult retrain(const SearchConfig& cfg, const CellArchitecture& arch,
                      const data::GaitDataset& train, int iterations,
                      const std::string& out_dir);

// Rank-1 identification. Each sequence embeds as the mean over its
// disjoint clip windows of the flattened (parts*D) embedding; every probe
// matches the Euclidean-nearest gallery embedding (ties keep the first
// gallery entry). Returns the fraction of probes whose match shares their
// identity.
double evaluate_rank1(const Supernet& net, const CellArchitecture& arch,
                      const data::GaitDataset& gallery,
                      const data::GaitDataset& probe);

}  // namespace clash::net

#pragma once

#include <string>
#include <vector>

#include "clash/tape.hpp"
#include "clash/tensor.hpp"

namespace clash::ad {

// Ordered set of named persistent tensors (network weights, architecture
// parameters). Insertion order is the canonical order used by the optimizer
// and the checkpoint format.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Tensor value;
  };

  // Adds a parameter; duplicate names are a contract error.
  Tensor& add(std::string name, Tensor value);

  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  bool contains(const std::string& name) const;

  std::size_t size() const { return entries_.size(); }
  Entry& entry(std::size_t i) { return entries_[i]; }
  const Entry& entry(std::size_t i) const { return entries_[i]; }

  // Registers every parameter on the tape; result is parallel to entries.
  std::vector<Tensor> leaves(Tape& tape) const;

  std::int64_t total_values() const;

 private:
  std::vector<Entry> entries_;
};

// One named payload of a checkpoint file.
struct NamedTensor {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

// Flat binary container: magic "CKPT", version byte, name table (name,
// shape per item), then contiguous 64-bit little-endian payloads.
void save_checkpoint(const std::string& path,
                     const std::vector<NamedTensor>& items);
std::vector<NamedTensor> load_checkpoint(const std::string& path);

// Store <-> checkpoint bridges. Loading requires every store parameter to
// be present with a matching shape.
std::vector<NamedTensor> snapshot(const ParamStore& store);
void restore(ParamStore& store, const std::vector<NamedTensor>& items);

}  // namespace clash::ad

#pragma once

#include <functional>
#include <vector>

#include "clash/tensor.hpp"

namespace clash::ad {

// Append-only record of primitive applications. Creation order is the
// topological order, so one reverse sweep visits every node after all of
// its children. A tape serves exactly one training step; parameters are
// re-registered as leaves on each fresh tape.
class Tape {
 public:
  // Registers t as a differentiable leaf and returns it with `node` set.
  Tensor leaf(Tensor t);

  // Records an interior node; `back(tape, self)` reads node_grad(self) and
  // propagates into its parents via grad_buffer().
  int record(std::function<void(Tape&, int)> back);

  // Gradient accumulator for a node, zero-initialized to `numel` on first
  // touch. Callers add into it; calling it marks the node as reached.
  std::vector<double>& grad_buffer(int node, std::int64_t numel);

  // The node's accumulated gradient; only valid inside back() for `self`.
  const std::vector<double>& node_grad(int node) const {
    return nodes_[std::size_t(node)].grad;
  }

  // Read-only view after backward(); empty if the node was never reached.
  const std::vector<double>& grad(const Tensor& t) const;

  // Seeds d(loss)/d(loss) = 1 and runs the reverse sweep. The loss must be
  // a scalar recorded on this tape.
  void backward(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    std::function<void(Tape&, int)> back;  // null for leaves
    std::vector<double> grad;
    bool reached = false;
  };
  std::vector<Node> nodes_;
};

}  // namespace clash::ad

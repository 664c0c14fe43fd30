#include "clash/tape.hpp"

#include "clash/errors.hpp"

namespace clash::ad {

std::string Shape::str() const {
  std::string s = "(";
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(d[i]);
  }
  return s + ")";
}

Tensor Tensor::zeros(Shape s) {
  Tensor t;
  t.data = std::make_shared<std::vector<double>>(std::size_t(s.numel()), 0.0);
  t.shape = std::move(s);
  return t;
}

Tensor Tensor::full(Shape s, double v) {
  Tensor t;
  t.data = std::make_shared<std::vector<double>>(std::size_t(s.numel()), v);
  t.shape = std::move(s);
  return t;
}

Tensor Tensor::from(Shape s, std::vector<double> v) {
  if (std::int64_t(v.size()) != s.numel())
    throw ContractError("Tensor::from: data length " +
                        std::to_string(v.size()) + " != shape " + s.str());
  Tensor t;
  t.shape = std::move(s);
  t.data = std::make_shared<std::vector<double>>(std::move(v));
  return t;
}

double Tensor::scalar() const {
  if (numel() != 1) throw ContractError("scalar() on shape " + shape.str());
  return (*data)[0];
}

Tensor Tape::leaf(Tensor t) {
  nodes_.emplace_back();
  t.node = int(nodes_.size()) - 1;
  return t;
}

int Tape::record(std::function<void(Tape&, int)> back) {
  nodes_.emplace_back();
  nodes_.back().back = std::move(back);
  return int(nodes_.size()) - 1;
}

std::vector<double>& Tape::grad_buffer(int node, std::int64_t numel) {
  Node& n = nodes_[std::size_t(node)];
  if (n.grad.empty()) n.grad.assign(std::size_t(numel), 0.0);
  n.reached = true;
  return n.grad;
}

const std::vector<double>& Tape::grad(const Tensor& t) const {
  static const std::vector<double> kEmpty;
  if (t.node < 0 || std::size_t(t.node) >= nodes_.size()) return kEmpty;
  return nodes_[std::size_t(t.node)].grad;
}

void Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1)
    throw ContractError("backward: loss must be scalar, got " +
                        loss.shape.str());
  if (loss.node < 0 || std::size_t(loss.node) >= nodes_.size())
    throw ContractError("backward: loss is not on this tape");
  grad_buffer(loss.node, 1)[0] += 1.0;
  for (int id = loss.node; id >= 0; --id) {
    Node& n = nodes_[std::size_t(id)];
    if (n.reached && n.back) n.back(*this, id);
  }
}

}  // namespace clash::ad

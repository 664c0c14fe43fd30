#include "clash/adam.hpp"

#include <cmath>

#include "clash/errors.hpp"

namespace clash::ad {

void Adam::step(ParamStore& store, const Tape& tape,
                const std::vector<Tensor>& leaves) {
  if (leaves.size() != store.size())
    throw ContractError("adam: leaves do not match the parameter store");
  if (m_.empty()) {
    m_.resize(store.size());
    v_.resize(store.size());
    for (std::size_t i = 0; i < store.size(); ++i) {
      const auto n = std::size_t(store.entry(i).value.numel());
      m_[i].assign(n, 0.0);
      v_[i].assign(n, 0.0);
    }
  }
  ++steps_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, double(steps_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, double(steps_));
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto& e = store.entry(i);
    const std::vector<double>& g = tape.grad(leaves[i]);
    const std::size_t n = e.value.data->size();
    if (!g.empty() && g.size() != n)
      throw ContractError("adam: gradient shape mismatch for '" + e.name +
                          "'");
    double* p = e.value.data->data();
    double* m = m_[i].data();
    double* v = v_[i].data();
    for (std::size_t j = 0; j < n; ++j) {
      const double gj = g.empty() ? 0.0 : g[j];
      if (!std::isfinite(gj))
        throw NumericError("adam: non-finite gradient for parameter '" +
                           e.name + "'");
      m[j] = cfg_.beta1 * m[j] + (1.0 - cfg_.beta1) * gj;
      v[j] = cfg_.beta2 * v[j] + (1.0 - cfg_.beta2) * gj * gj;
      p[j] -= cfg_.lr * (m[j] / bc1) / (std::sqrt(v[j] / bc2) + cfg_.eps);
    }
  }
}

std::vector<NamedTensor> Adam::snapshot_state(const ParamStore& store) const {
  std::vector<NamedTensor> items;
  if (m_.empty()) return items;
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& e = store.entry(i);
    items.push_back({"adam.m." + e.name, e.value.shape, m_[i]});
    items.push_back({"adam.v." + e.name, e.value.shape, v_[i]});
  }
  items.push_back({"adam.step", Shape{{1}}, {double(steps_)}});
  return items;
}

void Adam::restore_state(const ParamStore& store,
                         const std::vector<NamedTensor>& items) {
  m_.assign(store.size(), {});
  v_.assign(store.size(), {});
  const auto find = [&items](const std::string& name) -> const NamedTensor& {
    for (const auto& it : items)
      if (it.name == name) return it;
    throw ContractError("adam: missing state item '" + name + "'");
  };
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& e = store.entry(i);
    m_[i] = find("adam.m." + e.name).values;
    v_[i] = find("adam.v." + e.name).values;
    if (m_[i].size() != e.value.data->size() ||
        v_[i].size() != e.value.data->size())
      throw ContractError("adam: state size mismatch for '" + e.name + "'");
  }
  steps_ = std::int64_t(find("adam.step").values.at(0));
}

}  // namespace clash::ad

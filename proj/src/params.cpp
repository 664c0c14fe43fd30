#include "clash/params.hpp"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <memory>

#include "clash/errors.hpp"

namespace clash::ad {

Tensor& ParamStore::add(std::string name, Tensor value) {
  if (contains(name))
    throw ContractError("param store: duplicate parameter '" + name + "'");
  entries_.push_back({std::move(name), std::move(value)});
  return entries_.back().value;
}

Tensor& ParamStore::at(const std::string& name) {
  for (auto& e : entries_)
    if (e.name == name) return e.value;
  throw ContractError("param store: unknown parameter '" + name + "'");
}

const Tensor& ParamStore::at(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return e.value;
  throw ContractError("param store: unknown parameter '" + name + "'");
}

bool ParamStore::contains(const std::string& name) const {
  for (const auto& e : entries_)
    if (e.name == name) return true;
  return false;
}

std::vector<Tensor> ParamStore::leaves(Tape& tape) const {
  std::vector<Tensor> out;
  out.reserve(entries_.size());
  for (const auto& e : entries_) out.push_back(tape.leaf(e.value));
  return out;
}

std::int64_t ParamStore::total_values() const {
  std::int64_t n = 0;
  for (const auto& e : entries_) n += e.value.numel();
  return n;
}

namespace {

constexpr char kMagic[4] = {'C', 'K', 'P', 'T'};
constexpr unsigned char kVersion = 1;

void put_u32(std::string& buf, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) buf.push_back(char((v >> (8 * i)) & 0xff));
}

void put_f64(std::string& buf, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  for (int i = 0; i < 8; ++i) buf.push_back(char((bits >> (8 * i)) & 0xff));
}

struct Reader {
  const unsigned char* p;
  std::size_t size;
  std::size_t at = 0;
  const std::string& path;

  [[noreturn]] void fail(const std::string& what) const {
    throw FormatError(path + ": " + what, at);
  }
  void need(std::size_t n, const char* what) {
    if (at + n > size) fail(std::string("truncated ") + what);
  }
  std::uint32_t u32(const char* what) {
    need(4, what);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t(p[at + std::size_t(i)]) << (8 * i);
    at += 4;
    return v;
  }
  double f64(const char* what) {
    need(8, what);
    std::uint64_t bits = 0;
    for (int i = 0; i < 8; ++i)
      bits |= std::uint64_t(p[at + std::size_t(i)]) << (8 * i);
    at += 8;
    double v;
    std::memcpy(&v, &bits, 8);
    return v;
  }
};

}  // namespace

void save_checkpoint(const std::string& path,
                     const std::vector<NamedTensor>& items) {
  std::string buf;
  buf.append(kMagic, 4);
  buf.push_back(char(kVersion));
  put_u32(buf, std::uint32_t(items.size()));
  for (const auto& it : items) {
    put_u32(buf, std::uint32_t(it.name.size()));
    buf.append(it.name);
    put_u32(buf, std::uint32_t(it.shape.rank()));
    for (int i = 0; i < it.shape.rank(); ++i)
      put_u32(buf, std::uint32_t(it.shape[i]));
    if (std::int64_t(it.values.size()) != it.shape.numel())
      throw ContractError("checkpoint: payload size mismatch for '" +
                          it.name + "'");
  }
  for (const auto& it : items)
    for (double v : it.values) put_f64(buf, v);

  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw ContractError("checkpoint: cannot open '" + path + "'");
  const std::size_t written = std::fwrite(buf.data(), 1, buf.size(), f);
  std::fclose(f);
  if (written != buf.size())
    throw ContractError("checkpoint: short write to '" + path + "'");
}

std::vector<NamedTensor> load_checkpoint(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw FormatError(path + ": cannot open", 0);
  std::string buf;
  char chunk[65536];
  std::size_t n;
  while ((n = std::fread(chunk, 1, sizeof chunk, f)) > 0) buf.append(chunk, n);
  std::fclose(f);

  Reader r{reinterpret_cast<const unsigned char*>(buf.data()), buf.size(), 0,
           path};
  r.need(4, "magic");
  if (std::memcmp(buf.data(), kMagic, 4) != 0) r.fail("bad magic");
  r.at = 4;
  r.need(1, "version");
  if (r.p[r.at] != kVersion) r.fail("unsupported version");
  ++r.at;
  const std::uint32_t count = r.u32("item count");

  std::vector<NamedTensor> items(count);
  for (auto& it : items) {
    const std::uint32_t len = r.u32("name length");
    r.need(len, "name");
    it.name.assign(reinterpret_cast<const char*>(r.p + r.at), len);
    r.at += len;
    const std::uint32_t rank = r.u32("rank");
    it.shape.d.resize(rank);
    for (std::uint32_t i = 0; i < rank; ++i) {
      it.shape.d[i] = r.u32("extent");
      if (it.shape.d[i] == 0) r.fail("zero extent for '" + it.name + "'");
    }
  }
  for (auto& it : items) {
    it.values.resize(std::size_t(it.shape.numel()));
    for (double& v : it.values) v = r.f64("payload");
  }
  if (r.at != r.size) r.fail("trailing bytes");
  return items;
}

std::vector<NamedTensor> snapshot(const ParamStore& store) {
  std::vector<NamedTensor> items;
  items.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) {
    const auto& e = store.entry(i);
    items.push_back({e.name, e.value.shape, *e.value.data});
  }
  return items;
}

void restore(ParamStore& store, const std::vector<NamedTensor>& items) {
  for (std::size_t i = 0; i < store.size(); ++i) {
    auto& e = store.entry(i);
    const NamedTensor* found = nullptr;
    for (const auto& it : items)
      if (it.name == e.name) {
        found = &it;
        break;
      }
    if (!found)
      throw ContractError("checkpoint: missing parameter '" + e.name + "'");
    if (!(found->shape == e.value.shape))
      throw ContractError("checkpoint: shape mismatch for '" + e.name +
                          "': " + found->shape.str() + " vs " +
                          e.value.shape.str());
    *e.value.data = found->values;
  }
}

}  // namespace clash::ad

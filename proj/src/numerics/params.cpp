#include "v2st/numerics/params.hpp"

#include "v2st/numerics/errors.hpp"

namespace v2st::inline V2ST_REAL_NS {

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t stream) {
  std::uint64_t z = base + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Tensor normal_tensor(Shape shape, double stddev, Rng& rng) {
  Tensor t(std::move(shape));
  for (auto& v : t.values()) v = static_cast<Real>(rng.normal(0.0, stddev));
  return t;
}

Var ParamStore::add(std::string name, Tensor init) {
  if (contains(name)) throw ValidationError("duplicate parameter name: " + name);
  Var v = Var::parameter(std::move(init));
  params_.push_back({std::move(name), v});
  return v;
}

Var ParamStore::get(std::string_view name) const {
  for (const auto& p : params_)
    if (p.name == name) return p.var;
  throw ValidationError("unknown parameter: " + std::string(name));
}

bool ParamStore::contains(std::string_view name) const {
  for (const auto& p : params_)
    if (p.name == name) return true;
  return false;
}

std::size_t ParamStore::numel() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.var.value().size();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& p : params_) p.var.zero_grad();
}

std::vector<Tensor> ParamStore::snapshot() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.emplace_back(p.var.value().shape(), p.var.value().storage());
  return out;
}

bool ParamStore::equals(const std::vector<Tensor>& snapshot) const {
  if (snapshot.size() != params_.size()) return false;
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (!same_values(params_[i].var.value(), snapshot[i])) return false;
  return true;
}

}  // namespace v2st::inline V2ST_REAL_NS

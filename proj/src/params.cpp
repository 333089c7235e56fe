#include "seqcast/params.hpp"

#include "seqcast/rng.hpp"

namespace seqcast {

Parameter& ParameterStore::add(const std::string& name, Shape shape, Init init,
                               bool trainable) {
  if (by_name_.count(name))
    throw numeric_error("duplicate parameter name: " + name);
  auto p = std::make_unique<Parameter>();
  p->name = name;
  p->shape = std::move(shape);
  p->trainable = trainable;
  std::size_t n = shape_numel(p->shape);
  p->value.assign(n, 0.0);
  switch (init.kind) {
  case Init::Kind::zeros:
    break;
  case Init::Kind::ones:
    p->value.assign(n, 1.0);
    break;
  case Init::Kind::normal: {
    Rng rng(mix_seed(seed_, name));
    for (auto& v : p->value) v = rng.normal(0.0, init.stddev);
    break;
  }
  }
  Parameter* raw = p.get();
  own_.push_back(std::move(p));
  order_.push_back(raw);
  by_name_[name] = raw;
  return *raw;
}

Parameter* ParameterStore::find(const std::string& name) {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : it->second;
}

const Parameter* ParameterStore::find(const std::string& name) const {
  auto it = by_name_.find(name);
  return it == by_name_.end() ? nullptr : it->second;
}

std::vector<Parameter*> ParameterStore::trainable() const {
  std::vector<Parameter*> out;
  for (Parameter* p : order_)
    if (p->trainable) out.push_back(p);
  return out;
}

std::size_t ParameterStore::count_scalars(bool trainable_only) const {
  std::size_t n = 0;
  for (const Parameter* p : order_)
    if (!trainable_only || p->trainable) n += p->numel();
  return n;
}

void ParameterStore::clear_grads() {
  for (Parameter* p : order_) p->clear_grad();
}

} // namespace seqcast

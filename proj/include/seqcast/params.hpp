#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "seqcast/tensor.hpp"

namespace seqcast {

struct Init {
  enum class Kind { zeros, ones, normal } kind = Kind::zeros;
  double stddev = 0.0;

  static Init zeros() { return {Kind::zeros, 0.0}; }
  static Init ones() { return {Kind::ones, 0.0}; }
  static Init normal(double stddev) { return {Kind::normal, stddev}; }
};

// Owns all named parameters of a model. Each tensor is initialized from an
// RNG seeded by (store seed, tensor name), so the draw a tensor receives never
// depends on which other modules exist or in what order they registered.
class ParameterStore {
public:
  explicit ParameterStore(std::uint64_t seed) : seed_(seed) {}
  ParameterStore(const ParameterStore&) = delete;
  ParameterStore& operator=(const ParameterStore&) = delete;

  Parameter& add(const std::string& name, Shape shape, Init init,
                 bool trainable = true);

  Parameter* find(const std::string& name);
  const Parameter* find(const std::string& name) const;

  // Registration order (stable across runs with the same construction path).
  const std::vector<Parameter*>& all() const { return order_; }
  std::vector<Parameter*> trainable() const;

  std::size_t count_scalars(bool trainable_only = false) const;
  void clear_grads();
  std::uint64_t seed() const { return seed_; }

private:
  std::uint64_t seed_;
  std::vector<std::unique_ptr<Parameter>> own_;
  std::vector<Parameter*> order_;
  std::unordered_map<std::string, Parameter*> by_name_;
};

} // namespace seqcast

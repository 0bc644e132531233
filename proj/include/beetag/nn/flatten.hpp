#pragma once
#include <stdexcept>
#include <vector>

#include "beetag/nn/layers.hpp"

namespace beetag::nn {

// concatenates parameter (or buffer) vectors in registration order, the
// order checkpoints store them in

template <typename T>
std::vector<float> flatten_params(const std::vector<ParamRef<T>>& ps) {
  std::vector<float> flat;
  for (const auto& pr : ps)
    for (const auto& v : *pr.w) flat.push_back(float(v));
  return flat;
}

template <typename T>
void unflatten_params(const std::vector<float>& flat, std::vector<ParamRef<T>>& ps) {
  size_t total = 0;
  for (const auto& pr : ps) total += pr.w->size();
  if (flat.size() != total) throw std::invalid_argument("checkpoint parameter count mismatch");
  size_t off = 0;
  for (auto& pr : ps)
    for (auto& v : *pr.w) v = T(flat[off++]);
}

template <typename T>
std::vector<float> flatten_buffers(const std::vector<std::vector<T>*>& bs) {
  std::vector<float> flat;
  for (const auto* b : bs)
    for (const auto& v : *b) flat.push_back(float(v));
  return flat;
}

template <typename T>
void unflatten_buffers(const std::vector<float>& flat, std::vector<std::vector<T>*>& bs) {
  size_t total = 0;
  for (const auto* b : bs) total += b->size();
  if (flat.size() != total) throw std::invalid_argument("checkpoint buffer count mismatch");
  size_t off = 0;
  for (auto* b : bs)
    for (auto& v : *b) v = T(flat[off++]);
}

template <typename T>
std::vector<float> flatten_velocity(const std::vector<std::vector<T>>& vel) {
  std::vector<float> flat;
  for (const auto& v : vel)
    for (const auto& x : v) flat.push_back(float(x));
  return flat;
}

}  // namespace beetag::nn

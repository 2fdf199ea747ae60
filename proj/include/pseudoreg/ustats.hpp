#pragma once

#include "pseudoreg/rng.hpp"

#include <array>
#include <cstddef>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <vector>

namespace pseudoreg {

/// A degree-m kernel Phi(x_1, ..., x_m) with values in a real vector space
/// (double or an Eigen matrix type). Arguments arrive as m pointers.
template <class Item, class Value>
struct Kernel {
  int degree = 1;
  bool symmetric = true;
  std::function<Value(std::span<const Item* const>)> eval;
};

namespace detail {

inline constexpr int kMaxDegree = 4;

template <class Item, class Value>
void check_kernel(const Kernel<Item, Value>& k) {
  if (k.degree < 1 || k.degree > kMaxDegree) throw std::invalid_argument("kernel degree must be in [1, 4]");
  if (!k.eval) throw std::invalid_argument("kernel has no evaluation function");
}

// Visits every strictly increasing index tuple (distinct = true) or every
// index tuple (distinct = false) of length m over [0, n), in lexicographic order.
template <class Fn>
void for_each_tuple(std::size_t n, int m, bool distinct, Fn&& fn) {
  std::array<std::size_t, kMaxDegree> idx{};
  for (int j = 0; j < m; ++j) idx[j] = distinct ? static_cast<std::size_t>(j) : 0;
  if (distinct && n < static_cast<std::size_t>(m)) return;
  for (;;) {
    fn(std::span<const std::size_t>(idx.data(), static_cast<std::size_t>(m)));
    int j = m - 1;
    while (j >= 0) {
      const std::size_t limit = distinct ? n - static_cast<std::size_t>(m - j) : n - 1;
      if (idx[j] < limit) break;
      --j;
    }
    if (j < 0) return;
    ++idx[j];
    for (int l = j + 1; l < m; ++l) idx[l] = distinct ? idx[l - 1] + 1 : 0;
  }
}

template <class Item, class Value>
Value average(const Kernel<Item, Value>& k, std::span<const Item* const> items, bool distinct) {
  bool first = true;
  Value acc{};
  double count = 0.0;
  std::array<const Item*, kMaxDegree> args{};
  for_each_tuple(items.size(), k.degree, distinct, [&](std::span<const std::size_t> idx) {
    for (std::size_t j = 0; j < idx.size(); ++j) args[j] = items[idx[j]];
    Value v = k.eval(std::span<const Item* const>(args.data(), idx.size()));
    if (first) {
      acc = std::move(v);
      first = false;
    } else {
      acc += v;
    }
    count += 1.0;
  });
  return acc / count;
}

template <class Item>
std::vector<const Item*> pointers(std::span<const Item> data) {
  std::vector<const Item*> p;
  p.reserve(data.size());
  for (const auto& x : data) p.push_back(&x);
  return p;
}

template <class Item>
std::vector<const Item*> resample(std::span<const Item> data, Rng& rng) {
  std::uniform_int_distribution<std::size_t> pick(0, data.size() - 1);
  std::vector<const Item*> p(data.size());
  for (auto& x : p) x = &data[pick(rng)];
  return p;
}

}  // namespace detail

/// U-statistic: average of Phi over all C(n, m) subsets of distinct indices.
template <class Item, class Value>
Value u_statistic(const Kernel<Item, Value>& k, std::span<const Item> data) {
  detail::check_kernel(k);
  if (!k.symmetric) throw std::invalid_argument("U-statistics need a symmetric kernel");
  if (data.size() < static_cast<std::size_t>(k.degree)) throw std::invalid_argument("fewer items than the degree");
  const auto p = detail::pointers(data);
  return detail::average<Item, Value>(k, p, true);
}

/// V-statistic: average of Phi over all n^m index tuples, diagonal tuples included.
template <class Item, class Value>
Value v_statistic(const Kernel<Item, Value>& k, std::span<const Item> data) {
  detail::check_kernel(k);
  if (data.empty()) throw std::invalid_argument("V-statistic of an empty sample");
  const auto p = detail::pointers(data);
  return detail::average<Item, Value>(k, p, false);
}

/// U-statistic over n draws with replacement, taken over distinct positions of the resample.
template <class Item, class Value>
Value bootstrap_u_statistic(const Kernel<Item, Value>& k, std::span<const Item> data, Rng& rng) {
  detail::check_kernel(k);
  if (!k.symmetric) throw std::invalid_argument("U-statistics need a symmetric kernel");
  if (data.size() < static_cast<std::size_t>(k.degree)) throw std::invalid_argument("fewer items than the degree");
  const auto p = detail::resample(data, rng);
  return detail::average<Item, Value>(k, p, true);
}

template <class Item, class Value>
Value bootstrap_v_statistic(const Kernel<Item, Value>& k, std::span<const Item> data, Rng& rng) {
  detail::check_kernel(k);
  if (data.empty()) throw std::invalid_argument("V-statistic of an empty sample");
  const auto p = detail::resample(data, rng);
  return detail::average<Item, Value>(k, p, false);
}

}  // namespace pseudoreg

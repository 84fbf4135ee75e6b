#pragma once

#include <random>
#include <string>
#include <vector>

#include "pivotnmt/model.hpp"
#include "pivotnmt/vocabulary.hpp"

namespace testsupport {

inline pivotnmt::Vocabulary make_vocab(std::size_t words, const std::string& prefix = "w") {
  std::vector<std::string> list;
  for (std::size_t i = 0; i < words; ++i) list.push_back(prefix + std::to_string(i));
  return pivotnmt::Vocabulary(list);
}

// Random EOS-terminated sentence with `len` ordinary words.
inline pivotnmt::Sentence random_sentence(const pivotnmt::Vocabulary& vocab, std::size_t len, std::mt19937_64& rng) {
  std::uniform_int_distribution<pivotnmt::TokenId> pick(pivotnmt::Vocabulary::kReserved,
                                                        static_cast<pivotnmt::TokenId>(vocab.size() - 1));
  pivotnmt::Sentence s;
  for (std::size_t i = 0; i < len; ++i) s.push_back(pick(rng));
  s.push_back(pivotnmt::Vocabulary::kEos);
  return s;
}

// Central-difference derivative of f with respect to every scalar of every
// parameter in `params`, in canonical order.
template <class F>
std::vector<std::vector<double>> numeric_gradients(const std::vector<pivotnmt::Parameter*>& params, F&& f,
                                                   double step = 1e-5) {
  std::vector<std::vector<double>> out;
  for (pivotnmt::Parameter* p : params) {
    std::vector<double> d(p->value.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + step;
      const double up = f();
      p->value[i] = saved - step;
      const double down = f();
      p->value[i] = saved;
      d[i] = (up - down) / (2.0 * step);
    }
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace testsupport

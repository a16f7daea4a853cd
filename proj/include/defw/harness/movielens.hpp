#pragma once

// MovieLens u.data ingestion: "user<TAB>item<TAB>rating<TAB>timestamp" with
// 1-based ids, converted to 0-based observations.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <istream>
#include <cstdint>
#include <fstream>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "defw/error.hpp"
#include "defw/harness/datagen.hpp"
#include "defw/objectives.hpp"

namespace defw::harness {

struct MovieLensData {
  Eigen::Index users = 943;
  Eigen::Index items = 1682;
  std::vector<Observation> ratings;
};

namespace detail {
inline bool parse_field(std::string_view& rest, long long& out) {
  const auto tab = rest.find('\t');
  const std::string_view tok = rest.substr(0, tab);
  if (tok.empty()) return false;
  const auto [ptr, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), out);
  if (ec != std::errc{} || ptr != tok.data() + tok.size()) return false;
  rest = tab == std::string_view::npos ? std::string_view{} : rest.substr(tab + 1);
  return true;
}
}  // namespace detail

/// Ids must fall in [1, users] and [1, items]. Blank lines are skipped.
inline MovieLensData load_movielens(std::istream& is, Eigen::Index users = 943, Eigen::Index items = 1682) {
  MovieLensData out{users, items, {}};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::string_view rest(line);
    long long user = 0, item = 0, rating = 0, stamp = 0;
    if (!detail::parse_field(rest, user) || !detail::parse_field(rest, item) || !detail::parse_field(rest, rating) ||
        !detail::parse_field(rest, stamp) || !rest.empty())
      throw ParseError("expected 'user<TAB>item<TAB>rating<TAB>timestamp', got '" + line + "'", line_no);
    if (user < 1 || user > users) throw ParseError("user id " + std::to_string(user) + " out of range", line_no);
    if (item < 1 || item > items) throw ParseError("item id " + std::to_string(item) + " out of range", line_no);
    out.ratings.push_back(Observation{static_cast<Eigen::Index>(user - 1), static_cast<Eigen::Index>(item - 1),
                                      static_cast<double>(rating)});
  }
  return out;
}

inline MovieLensData load_movielens(const std::string& path, Eigen::Index users = 943, Eigen::Index items = 1682) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open MovieLens file '" + path + "'");
  return load_movielens(in, users, items);
}

struct RatingSplit {
  std::vector<Observation> train;
  std::vector<Observation> test;
};

/// Seeded shuffle, first round(train_fraction * n) entries go to training.
inline RatingSplit split_ratings(const std::vector<Observation>& ratings, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw ContractViolation("split_ratings: train fraction must lie in (0, 1)");
  std::vector<Observation> shuffled = ratings;
  std::mt19937_64 rng(seed);
  std::shuffle(shuffled.begin(), shuffled.end(), rng);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(shuffled.size())));
  RatingSplit out;
  out.train.assign(shuffled.begin(), shuffled.begin() + static_cast<std::ptrdiff_t>(n_train));
  out.test.assign(shuffled.begin() + static_cast<std::ptrdiff_t>(n_train), shuffled.end());
  return out;
}

struct MovieLensInstance {
  ProblemInstance problem;
  std::vector<Observation> test;
};

inline MovieLensInstance movielens_instance(const MovieLensData& data, std::size_t n_agents, double train_fraction,
                                            const McLoss& loss, std::uint64_t seed) {
  if (n_agents < 1) throw ContractViolation("movielens_instance: need at least one agent");
  RatingSplit split = split_ratings(data.ratings, train_fraction, seed);
  if (split.train.size() < n_agents) throw ContractViolation("movielens_instance: fewer ratings than agents");
  return {ProblemInstance(make_mc_problem(data.users, data.items, split_blocks(split.train, n_agents), loss)),
          std::move(split.test)};
}

}  // namespace defw::harness

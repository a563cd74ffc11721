// Copyright 2026 The intrinsic-compose Authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace icomp::bt {

/// Pairwise win counts; wins[i][j] is how often methods[i] beat methods[j].
class PairwiseTally {
 public:
  PairwiseTally() = default;

  /// Index of `name`, appending it if unseen.
  std::size_t add_method(std::string_view name);
  void record(std::string_view winner, std::string_view loser, std::int64_t count = 1);
  void record(std::size_t winner, std::size_t loser, std::int64_t count = 1);

  std::size_t size() const { return methods_.size(); }
  const std::vector<std::string>& methods() const { return methods_; }
  std::int64_t wins(std::size_t i, std::size_t j) const { return wins_[i][j]; }
  std::int64_t total_wins(std::size_t i) const;
  std::int64_t total_comparisons() const;

  /// Multiplies every count by `factor`.
  PairwiseTally scaled(std::int64_t factor) const;

 private:
  std::vector<std::string> methods_;
  std::vector<std::vector<std::int64_t>> wins_;
};

struct Response {
  std::string item_id;
  std::string method_a;
  std::string method_b;
  char choice = 'a';  // 'a' or 'b'
};

/// Parses CSV with header `item_id,method_a,method_b,choice`. Rows are
/// numbered from 1 after the header in error messages.
std::vector<Response> parse_responses(std::istream& csv);
PairwiseTally ingest_responses(const std::vector<Response>& rows);
PairwiseTally ingest_responses(std::istream& csv);

struct FitOptions {
  int max_iters = 1000;
  double tol = 1e-10;
  /// Adds 0.5 to every ordered pair that has been compared. Off by default:
  /// zero-win methods are then an error.
  bool smoothing = false;
};

struct Scores {
  std::vector<double> values;  // sum to 1
  int iterations = 0;
  bool converged = false;
};

/// Maximum-likelihood Bradley-Terry scores by minorize-maximize iteration.
/// Throws NumericalError naming the methods when the comparison graph is
/// disconnected or a method never wins.
Scores fit(const PairwiseTally& tally, const FitOptions& options = {});

/// sum_ij w_ij log(s_i / (s_i + s_j))
double log_likelihood(const PairwiseTally& tally, const std::vector<double>& scores);

struct RankRow {
  std::string method;
  double score = 0.0;
};

/// Sorted by descending score; ties keep first-seen order.
std::vector<RankRow> rank(const PairwiseTally& tally, const Scores& scores);
std::string format_table(const std::vector<RankRow>& rows);
nlohmann::json to_json(const std::vector<RankRow>& rows);

}  // namespace icomp::bt
